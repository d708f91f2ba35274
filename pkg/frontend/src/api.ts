/** Thin typed client for the scribe service. All application state lives on
 * the server; this module only shuttles JSON and raises structured errors. */

import type {
  ApiError,
  Note,
  NoteSection,
  NoteTemplate,
  Recording,
  Session,
  Transcript,
} from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class RequestFailed extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiError,
  ) {
    super(`${body.error}: ${body.detail ?? ""} (HTTP ${status})`);
    this.name = "RequestFailed";
  }
}

export interface ClientConfig {
  baseUrl: string;
  token: string;
  /** Injectable for tests; defaults to the global fetch. */
  fetchImpl?: FetchLike;
}

export class ApiClient {
  private readonly fetchImpl: FetchLike;

  constructor(private readonly config: ClientConfig) {
    this.fetchImpl = config.fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = {
      method,
      headers: { Authorization: `Bearer ${this.config.token}` },
    };
    if (body instanceof FormData) {
      init.body = body;
    } else if (body !== undefined) {
      init.headers = { ...init.headers, "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.config.baseUrl + path, init);
    const payload = await response.json();
    if (!response.ok) {
      throw new RequestFailed(response.status, payload as ApiError);
    }
    return payload as T;
  }

  listSessions(): Promise<Session[]> {
    return this.request("GET", "/sessions");
  }

  createSession(facilityId?: string): Promise<Session> {
    return this.request("POST", "/sessions", {
      facility_id: facilityId ?? null,
    });
  }

  getSession(id: string): Promise<Session> {
    return this.request("GET", `/sessions/${id}`);
  }

  uploadRecording(
    sessionId: string,
    audio: Blob,
    filename = "capture.wav",
  ): Promise<{ recording: Recording; job_id: string }> {
    const form = new FormData();
    form.append("file", audio, filename);
    return this.request("POST", `/sessions/${sessionId}/recordings`, form);
  }

  getRecording(id: string): Promise<Recording> {
    return this.request("GET", `/recordings/${id}`);
  }

  getTranscript(recordingId: string): Promise<Transcript> {
    return this.request("GET", `/recordings/${recordingId}/transcript`);
  }

  createNote(
    sessionId: string,
    templateId: string,
    transcriptIds: string[],
  ): Promise<{ note: Note; job_id: string }> {
    return this.request("POST", `/sessions/${sessionId}/notes`, {
      template_id: templateId,
      transcript_ids: transcriptIds,
    });
  }

  getNote(id: string): Promise<Note> {
    return this.request("GET", `/notes/${id}`);
  }

  editNote(id: string, sections: NoteSection[]): Promise<Note> {
    return this.request("PATCH", `/notes/${id}`, { sections });
  }

  finalizeNote(id: string): Promise<Note> {
    return this.request("POST", `/notes/${id}/finalize`);
  }

  listTemplates(): Promise<NoteTemplate[]> {
    return this.request("GET", "/templates");
  }

  createTemplate(body: {
    name: string;
    sections: { title: string; instruction?: string }[];
    preamble?: string;
  }): Promise<NoteTemplate> {
    return this.request("POST", "/templates", body);
  }
}
