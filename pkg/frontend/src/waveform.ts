/** Waveform rendering for the main panel (waveform above the note). Peak
 * computation is pure so it can be tested without a canvas. */

export interface Peak {
  min: number;
  max: number;
}

/** Reduce samples to `buckets` min/max pairs. Buckets partition the sample
 * array as evenly as possible; an empty bucket yields {0, 0}. */
export function computePeaks(samples: Float32Array, buckets: number): Peak[] {
  if (buckets <= 0) throw new RangeError("buckets must be positive");
  const peaks: Peak[] = [];
  for (let b = 0; b < buckets; b++) {
    const start = Math.floor((b * samples.length) / buckets);
    const end = Math.floor(((b + 1) * samples.length) / buckets);
    if (start >= end) {
      peaks.push({ min: 0, max: 0 });
      continue;
    }
    let min = samples[start];
    let max = samples[start];
    for (let i = start + 1; i < end; i++) {
      if (samples[i] < min) min = samples[i];
      if (samples[i] > max) max = samples[i];
    }
    peaks.push({ min, max });
  }
  return peaks;
}

export function drawWaveform(
  ctx: CanvasRenderingContext2D,
  samples: Float32Array,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const peaks = computePeaks(samples, Math.max(1, Math.floor(width)));
  const mid = height / 2;
  ctx.beginPath();
  peaks.forEach((peak, x) => {
    ctx.moveTo(x + 0.5, mid - peak.max * (mid - 1));
    ctx.lineTo(x + 0.5, mid - peak.min * (mid - 1));
  });
  ctx.stroke();
}
