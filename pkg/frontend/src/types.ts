/** Wire types mirroring the service's JSON payloads. The UI never transforms
 * note content; these shapes are displayed as-is. */

export type SessionStatus =
  | "empty"
  | "has_audio"
  | "transcribed"
  | "note_ready"
  | "error";

export interface Session {
  id: string;
  owner_id: string;
  facility_id: string | null;
  created_at: string;
  archived: boolean;
  recording_ids: string[];
  note_ids: string[];
  status: SessionStatus;
}

export interface Recording {
  id: string;
  session_id: string;
  duration_s: number;
  sample_rate_hz: number;
  media_format: string;
  status: "uploaded" | "transcribing" | "transcribed" | "failed";
  created_at: string;
}

export interface TranscriptSegment {
  start_s: number;
  end_s: number;
  text: string;
}

export interface Transcript {
  id: string;
  recording_id: string;
  full_text: string;
  segments: TranscriptSegment[];
}

export interface NoteSection {
  title: string;
  body: string;
}

export type NoteStatus = "generating" | "draft" | "edited" | "finalized" | "failed";

export interface Note {
  id: string;
  session_id: string;
  template_id: string;
  status: NoteStatus;
  sections: NoteSection[];
  created_at: string;
  edited_at: string | null;
}

export interface TemplateSection {
  title: string;
  instruction: string;
}

export interface NoteTemplate {
  id: string;
  name: string;
  kind: "builtin" | "custom";
  owner_id: string | null;
  sections: TemplateSection[];
}

export interface ApiError {
  error: string;
  detail: string;
  violations?: string[];
}
