/** Microphone capture. Collects mono Float32 chunks from the audio graph and
 * hands back one concatenated buffer plus the context sample rate, ready for
 * wav.encodeWav. */

export class PermissionDenied extends Error {
  constructor() {
    super("Microphone access was denied. Allow it in the browser and retry, or upload a file instead.");
    this.name = "PermissionDenied";
  }
}

export interface Capture {
  samples: Float32Array;
  sampleRate: number;
}

export class Recorder {
  private chunks: Float32Array[] = [];
  private stream: MediaStream | null = null;
  private context: AudioContext | null = null;
  private processor: ScriptProcessorNode | null = null;

  async start(): Promise<void> {
    try {
      this.stream = await navigator.mediaDevices.getUserMedia({ audio: true });
    } catch {
      throw new PermissionDenied();
    }
    this.context = new AudioContext();
    const source = this.context.createMediaStreamSource(this.stream);
    this.processor = this.context.createScriptProcessor(4096, 1, 1);
    this.processor.onaudioprocess = (event) => {
      this.chunks.push(new Float32Array(event.inputBuffer.getChannelData(0)));
    };
    source.connect(this.processor);
    this.processor.connect(this.context.destination);
  }

  async stop(): Promise<Capture> {
    const sampleRate = this.context?.sampleRate ?? 48000;
    this.processor?.disconnect();
    this.stream?.getTracks().forEach((track) => track.stop());
    await this.context?.close();
    const total = this.chunks.reduce((n, c) => n + c.length, 0);
    const samples = new Float32Array(total);
    let offset = 0;
    for (const chunk of this.chunks) {
      samples.set(chunk, offset);
      offset += chunk.length;
    }
    this.chunks = [];
    return { samples, sampleRate };
  }
}
