import { describe, expect, it } from "vitest";

import {
  applyLocalEdit,
  editorFromNote,
  isReadOnly,
  markSaved,
  mergePolledNote,
} from "../src/editor";
import type { Note, NoteStatus } from "../src/types";

function note(status: NoteStatus, bodies: string[] = ["hpi text", "plan text"]): Note {
  return {
    id: "n1",
    session_id: "s1",
    template_id: "t1",
    status,
    sections: bodies.map((body, i) => ({ title: `Section ${i}`, body })),
    created_at: "2025-01-01T00:00:00.000Z",
    edited_at: null,
  };
}

describe("editor dirty tracking", () => {
  it("starts clean and becomes dirty on a real change", () => {
    let state = editorFromNote(note("draft"));
    expect(state.dirty).toBe(false);
    state = applyLocalEdit(state, 0, "changed");
    expect(state.dirty).toBe(true);
  });

  it("reverting the text clears the dirty flag", () => {
    let state = editorFromNote(note("draft"));
    state = applyLocalEdit(state, 0, "changed");
    state = applyLocalEdit(state, 0, "hpi text");
    expect(state.dirty).toBe(false);
  });

  it("local edits never mutate the baseline", () => {
    const state = editorFromNote(note("draft"));
    const edited = applyLocalEdit(state, 1, "new plan");
    expect(edited.baseline[1].body).toBe("plan text");
    expect(state.sections[1].body).toBe("plan text");
  });
});

describe("read-only statuses", () => {
  it("finalized, failed, and generating notes are read-only", () => {
    for (const status of ["finalized", "failed", "generating"] as const) {
      expect(isReadOnly(editorFromNote(note(status)))).toBe(true);
      expect(() => applyLocalEdit(editorFromNote(note(status)), 0, "x")).toThrow();
    }
  });

  it("draft and edited notes are editable", () => {
    for (const status of ["draft", "edited"] as const) {
      expect(isReadOnly(editorFromNote(note(status)))).toBe(false);
    }
  });
});

describe("polling merge (the clobber guard)", () => {
  it("a clean editor adopts the polled note wholesale", () => {
    const state = editorFromNote(note("draft"));
    const polled = note("edited", ["server hpi", "server plan"]);
    const { state: merged, conflict } = mergePolledNote(state, polled);
    expect(conflict).toBe(false);
    expect(merged.sections[0].body).toBe("server hpi");
    expect(merged.status).toBe("edited");
  });

  it("a dirty editor keeps local text when the server is unchanged", () => {
    let state = editorFromNote(note("draft"));
    state = applyLocalEdit(state, 0, "my unsaved work");
    const { state: merged, conflict } = mergePolledNote(state, note("draft"));
    expect(conflict).toBe(false);
    expect(merged.sections[0].body).toBe("my unsaved work");
    expect(merged.dirty).toBe(true);
  });

  it("a dirty editor flags a conflict when the server content moved", () => {
    let state = editorFromNote(note("draft"));
    state = applyLocalEdit(state, 0, "my unsaved work");
    const polled = note("edited", ["someone else's edit", "plan text"]);
    const { state: merged, conflict } = mergePolledNote(state, polled);
    expect(conflict).toBe(true);
    expect(merged.sections[0].body).toBe("my unsaved work"); // still not clobbered
  });

  it("a finalize elsewhere locks a dirty editor via status", () => {
    let state = editorFromNote(note("draft"));
    state = applyLocalEdit(state, 0, "unsaved");
    const { state: merged } = mergePolledNote(state, note("finalized"));
    expect(isReadOnly(merged)).toBe(true);
  });
});

describe("markSaved", () => {
  it("resets baseline and dirty flag to the saved server copy", () => {
    let state = editorFromNote(note("draft"));
    state = applyLocalEdit(state, 0, "saved body");
    const saved = note("edited", ["saved body", "plan text"]);
    const after = markSaved(state, saved);
    expect(after.dirty).toBe(false);
    expect(after.baseline[0].body).toBe("saved body");
    expect(after.status).toBe("edited");
  });
});
