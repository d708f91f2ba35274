/** Sidebar view model: sessions newest-first, each with a one-line preview of
 * its newest note. Ordering must match the server's list contract
 * (created_at descending, id as tiebreaker) even if callers pass sessions
 * in arbitrary order. */

import type { Note, Session, SessionStatus } from "./types";

export interface SessionListItem {
  id: string;
  createdAt: string;
  status: SessionStatus;
  preview: string;
}

const STATUS_LABELS: Record<SessionStatus, string> = {
  empty: "No audio yet",
  has_audio: "Processing audio",
  transcribed: "Transcript ready",
  note_ready: "Note ready",
  error: "Needs attention",
};

export function statusLabel(status: SessionStatus): string {
  return STATUS_LABELS[status];
}

function firstLine(text: string): string {
  const line = text.split("\n", 1)[0].trim();
  return line.length > 80 ? line.slice(0, 79) + "…" : line;
}

/** Preview = first non-empty body line of the newest note, or empty string. */
export function notePreview(notes: Note[]): string {
  if (notes.length === 0) return "";
  const newest = [...notes].sort((a, b) =>
    a.created_at === b.created_at
      ? a.id < b.id
        ? 1
        : -1
      : a.created_at < b.created_at
        ? 1
        : -1,
  )[0];
  for (const section of newest.sections) {
    if (section.body.trim()) return firstLine(section.body);
  }
  return "";
}

export function buildSessionList(
  sessions: Session[],
  notesBySession: Map<string, Note[]>,
): SessionListItem[] {
  const ordered = [...sessions].sort((a, b) => {
    if (a.created_at !== b.created_at) {
      return a.created_at < b.created_at ? 1 : -1;
    }
    return a.id < b.id ? 1 : a.id > b.id ? -1 : 0;
  });
  return ordered.map((session) => ({
    id: session.id,
    createdAt: session.created_at,
    status: session.status,
    preview: notePreview(notesBySession.get(session.id) ?? []),
  }));
}
