/** Note editor state. The server is authoritative; the editor tracks local
 * edits and a dirty flag so the 2 s background poll never clobbers unsaved
 * text. */

import type { Note, NoteSection, NoteStatus } from "./types";

export interface EditorState {
  noteId: string;
  status: NoteStatus;
  sections: NoteSection[];
  dirty: boolean;
  /** Server copy the local sections were last synced from. */
  baseline: NoteSection[];
}

export function editorFromNote(note: Note): EditorState {
  return {
    noteId: note.id,
    status: note.status,
    sections: note.sections.map((s) => ({ ...s })),
    dirty: false,
    baseline: note.sections.map((s) => ({ ...s })),
  };
}

export function isReadOnly(state: EditorState): boolean {
  return state.status !== "draft" && state.status !== "edited";
}

export function applyLocalEdit(
  state: EditorState,
  sectionIndex: number,
  body: string,
): EditorState {
  if (isReadOnly(state)) {
    throw new Error(`note is ${state.status}; editing is disabled`);
  }
  const sections = state.sections.map((s, i) =>
    i === sectionIndex ? { ...s, body } : s,
  );
  const dirty = sections.some(
    (s, i) => s.body !== state.baseline[i].body,
  );
  return { ...state, sections, dirty };
}

/**
 * Merge a freshly polled server note into the editor.
 *
 * - Clean editor: adopt the server copy wholesale (status chips, regenerated
 *   sections, finalization by another tab all flow through).
 * - Dirty editor: keep local section text, but still adopt the server status
 *   so a finalize elsewhere locks the editor; the caller should surface a
 *   reload prompt when the server content moved under us.
 */
export function mergePolledNote(
  state: EditorState,
  polled: Note,
): { state: EditorState; conflict: boolean } {
  if (!state.dirty) {
    return { state: editorFromNote(polled), conflict: false };
  }
  const serverMoved =
    JSON.stringify(polled.sections) !== JSON.stringify(state.baseline);
  return {
    state: { ...state, status: polled.status },
    conflict: serverMoved,
  };
}

/** After a successful PATCH the server note is the new baseline. */
export function markSaved(state: EditorState, saved: Note): EditorState {
  return editorFromNote(saved);
}
