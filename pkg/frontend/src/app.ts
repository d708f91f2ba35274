/** DOM wiring: left sidebar lists sessions, the main panel shows the
 * waveform above the generated note. All authoritative state lives on the
 * server; this file only reacts to API payloads. */

import { ApiClient, RequestFailed } from "./api";
import { copyNoteToClipboard } from "./clipboard";
import {
  applyLocalEdit,
  EditorState,
  editorFromNote,
  isReadOnly,
  mergePolledNote,
} from "./editor";
import { pollUntilSettled } from "./poller";
import { PermissionDenied, Recorder } from "./recorder";
import { buildSessionList, statusLabel } from "./sessionList";
import type { Note, NoteTemplate, Session } from "./types";
import { drawWaveform } from "./waveform";
import { encodeWav } from "./wav";

interface AppElements {
  sidebar: HTMLElement;
  banner: HTMLElement;
  waveform: HTMLCanvasElement;
  noteContainer: HTMLElement;
  templateSelect: HTMLSelectElement;
  recordButton: HTMLButtonElement;
  uploadInput: HTMLInputElement;
  copyButton: HTMLButtonElement;
  saveButton: HTMLButtonElement;
  finalizeButton: HTMLButtonElement;
  errorBar: HTMLElement;
}

export class App {
  private client: ApiClient;
  private recorder = new Recorder();
  private recording = false;
  private currentSession: Session | null = null;
  private editor: EditorState | null = null;
  private currentNote: Note | null = null;
  private templates: NoteTemplate[] = [];

  constructor(
    private readonly el: AppElements,
    baseUrl: string,
    token: string,
    private readonly demoMode = false,
  ) {
    this.client = new ApiClient({ baseUrl, token });
  }

  async init(): Promise<void> {
    if (this.demoMode) {
      this.el.banner.textContent =
        "Demo mode — all data shown are simulated patient sessions.";
      this.el.banner.hidden = false;
    }
    this.el.recordButton.addEventListener("click", () => this.toggleRecording());
    this.el.uploadInput.addEventListener("change", () => this.uploadPicked());
    this.el.copyButton.addEventListener("click", () => this.copyNote());
    this.el.saveButton.addEventListener("click", () => this.saveNote());
    this.el.finalizeButton.addEventListener("click", () => this.finalizeNote());
    await Promise.all([this.refreshSidebar(), this.loadTemplates()]);
  }

  private showError(message: string): void {
    this.el.errorBar.textContent = message;
    this.el.errorBar.hidden = false;
  }

  private async guard<T>(work: () => Promise<T>): Promise<T | undefined> {
    try {
      this.el.errorBar.hidden = true;
      return await work();
    } catch (err) {
      if (err instanceof PermissionDenied || err instanceof RequestFailed) {
        this.showError(err.message);
      } else {
        this.showError("Something went wrong; please retry.");
      }
      return undefined;
    }
  }

  async refreshSidebar(): Promise<void> {
    await this.guard(async () => {
      const sessions = await this.client.listSessions();
      const notes = new Map<string, Note[]>();
      const items = buildSessionList(sessions, notes);
      this.el.sidebar.replaceChildren(
        ...items.map((item) => {
          const row = document.createElement("button");
          row.className = "session-row";
          row.textContent = `${item.createdAt}  ${statusLabel(item.status)}`;
          row.addEventListener("click", () => void this.openSession(item.id));
          return row;
        }),
      );
    });
  }

  private async loadTemplates(): Promise<void> {
    await this.guard(async () => {
      this.templates = await this.client.listTemplates();
      this.el.templateSelect.replaceChildren(
        ...this.templates.map((t) => {
          const option = document.createElement("option");
          option.value = t.id;
          option.textContent = t.name;
          return option;
        }),
      );
    });
  }

  async openSession(id: string): Promise<void> {
    await this.guard(async () => {
      this.currentSession = await this.client.getSession(id);
      const ids = this.currentSession.note_ids;
      const noteId = ids[ids.length - 1];
      if (noteId) {
        const note = await this.client.getNote(noteId);
        this.adoptNote(note);
      } else {
        this.currentNote = null;
        this.editor = null;
        this.el.noteContainer.replaceChildren();
      }
    });
  }

  private async toggleRecording(): Promise<void> {
    if (!this.recording) {
      const ok = await this.guard(() => this.recorder.start());
      if (ok !== undefined) {
        this.recording = true;
        this.el.recordButton.textContent = "Stop";
      }
      return;
    }
    this.recording = false;
    this.el.recordButton.textContent = "Record";
    await this.guard(async () => {
      const capture = await this.recorder.stop();
      drawWaveform(
        this.el.waveform.getContext("2d")!,
        capture.samples,
        this.el.waveform.width,
        this.el.waveform.height,
      );
      const wav = encodeWav(capture.samples, capture.sampleRate);
      await this.upload(new Blob([wav], { type: "audio/wav" }));
    });
  }

  private async uploadPicked(): Promise<void> {
    const file = this.el.uploadInput.files?.[0];
    if (file) await this.guard(() => this.upload(file, file.name));
  }

  private async upload(audio: Blob, filename = "capture.wav"): Promise<void> {
    if (!this.currentSession) {
      const session = await this.client.createSession();
      this.currentSession = session;
    }
    const { recording } = await this.client.uploadRecording(
      this.currentSession.id,
      audio,
      filename,
    );
    pollUntilSettled(
      () => this.client.getRecording(recording.id),
      (r) => r.status === "transcribed" || r.status === "failed",
      (r) => {
        if (r.status === "transcribed") void this.generateNote(r.id);
        if (r.status === "failed") this.showError("Transcription failed — upload again to retry.");
      },
    );
    void this.refreshSidebar();
  }

  private async generateNote(recordingId: string): Promise<void> {
    await this.guard(async () => {
      const transcript = await this.client.getTranscript(recordingId);
      const templateId = this.el.templateSelect.value || "builtin-full-visit";
      const { note } = await this.client.createNote(
        this.currentSession!.id,
        templateId,
        [transcript.id],
      );
      pollUntilSettled(
        () => this.client.getNote(note.id),
        (n) => n.status !== "generating",
        (n) => this.pollNoteUpdate(n),
      );
    });
  }

  private pollNoteUpdate(note: Note): void {
    if (!this.editor || this.editor.noteId !== note.id) {
      this.adoptNote(note);
      return;
    }
    const { state, conflict } = mergePolledNote(this.editor, note);
    this.editor = state;
    this.currentNote = note;
    if (conflict) {
      this.showError("This note changed on the server — reload before saving.");
    }
    this.renderEditor();
  }

  private adoptNote(note: Note): void {
    this.currentNote = note;
    this.editor = editorFromNote(note);
    this.renderEditor();
  }

  private renderEditor(): void {
    if (!this.editor) return;
    const readOnly = isReadOnly(this.editor);
    this.el.noteContainer.replaceChildren(
      ...this.editor.sections.flatMap((section, index) => {
        const title = document.createElement("h3");
        title.textContent = section.title;
        const body = document.createElement("textarea");
        body.value = section.body;
        body.readOnly = readOnly;
        body.addEventListener("input", () => {
          this.editor = applyLocalEdit(this.editor!, index, body.value);
        });
        return [title, body];
      }),
    );
    this.el.saveButton.disabled = readOnly;
    this.el.finalizeButton.disabled = readOnly;
  }

  private async saveNote(): Promise<void> {
    if (!this.editor || !this.editor.dirty) return;
    await this.guard(async () => {
      const saved = await this.client.editNote(
        this.editor!.noteId,
        this.editor!.sections,
      );
      this.adoptNote(saved);
    });
  }

  private async finalizeNote(): Promise<void> {
    if (!this.editor) return;
    await this.guard(async () => {
      const final = await this.client.finalizeNote(this.editor!.noteId);
      this.adoptNote(final);
    });
  }

  private async copyNote(): Promise<void> {
    if (this.currentNote) {
      await this.guard(() => copyNoteToClipboard(this.currentNote!));
    }
  }
}
