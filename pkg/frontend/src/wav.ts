/** Encode captured audio as PCM16 WAV, 16 kHz mono — the upload format the
 * service expects. Browsers hand us Float32 samples at the context rate, so
 * we resample (linear interpolation) and quantize here. */

export const TARGET_SAMPLE_RATE = 16000;

export function resampleLinear(
  samples: Float32Array,
  fromRate: number,
  toRate: number,
): Float32Array {
  if (fromRate === toRate) return samples;
  const outLength = Math.max(1, Math.round((samples.length * toRate) / fromRate));
  const out = new Float32Array(outLength);
  const step = (samples.length - 1) / Math.max(1, outLength - 1);
  for (let i = 0; i < outLength; i++) {
    const pos = i * step;
    const lo = Math.floor(pos);
    const hi = Math.min(lo + 1, samples.length - 1);
    const frac = pos - lo;
    out[i] = samples[lo] * (1 - frac) + samples[hi] * frac;
  }
  return out;
}

export function floatToPcm16(sample: number): number {
  const clamped = Math.max(-1, Math.min(1, sample));
  return Math.round(clamped < 0 ? clamped * 0x8000 : clamped * 0x7fff);
}

/** Build a complete RIFF/WAVE file (44-byte header + PCM16 LE data). */
export function encodeWav(
  samples: Float32Array,
  sourceRate: number,
  targetRate: number = TARGET_SAMPLE_RATE,
): ArrayBuffer {
  const mono = resampleLinear(samples, sourceRate, targetRate);
  const dataBytes = mono.length * 2;
  const buffer = new ArrayBuffer(44 + dataBytes);
  const view = new DataView(buffer);

  const writeAscii = (offset: number, text: string) => {
    for (let i = 0; i < text.length; i++) {
      view.setUint8(offset + i, text.charCodeAt(i));
    }
  };

  writeAscii(0, "RIFF");
  view.setUint32(4, 36 + dataBytes, true);
  writeAscii(8, "WAVE");
  writeAscii(12, "fmt ");
  view.setUint32(16, 16, true); // PCM fmt chunk size
  view.setUint16(20, 1, true); // audio format: PCM
  view.setUint16(22, 1, true); // channels: mono
  view.setUint32(24, targetRate, true);
  view.setUint32(28, targetRate * 2, true); // byte rate
  view.setUint16(32, 2, true); // block align
  view.setUint16(34, 16, true); // bits per sample
  writeAscii(36, "data");
  view.setUint32(40, dataBytes, true);
  for (let i = 0; i < mono.length; i++) {
    view.setInt16(44 + i * 2, floatToPcm16(mono[i]), true);
  }
  return buffer;
}

export function wavDurationSeconds(buffer: ArrayBuffer): number {
  const view = new DataView(buffer);
  const sampleRate = view.getUint32(24, true);
  const dataBytes = view.getUint32(40, true);
  return dataBytes / 2 / sampleRate;
}
