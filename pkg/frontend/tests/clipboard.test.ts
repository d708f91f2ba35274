import { describe, expect, it, vi } from "vitest";

import { copyNoteToClipboard, renderNoteText } from "../src/clipboard";
import type { Note } from "../src/types";

const note: Note = {
  id: "n1",
  session_id: "s1",
  template_id: "t1",
  status: "finalized",
  sections: [
    { title: "HPI", body: "Three days of cough." },
    { title: "Plan", body: "Supportive care.\nFollow up in a week." },
  ],
  created_at: "2025-01-01T00:00:00.000Z",
  edited_at: null,
};

describe("renderNoteText", () => {
  it("contains every section title and body", () => {
    const text = renderNoteText(note);
    for (const section of note.sections) {
      expect(text).toContain(section.title);
      expect(text).toContain(section.body);
    }
  });

  it("keeps sections in order with markdown headings", () => {
    expect(renderNoteText(note)).toBe(
      "## HPI\nThree days of cough.\n\n## Plan\nSupportive care.\nFollow up in a week.",
    );
  });
});

describe("copyNoteToClipboard", () => {
  it("uses the async clipboard API when available", async () => {
    const writeText = vi.fn().mockResolvedValue(undefined);
    vi.stubGlobal("navigator", { clipboard: { writeText } });
    await copyNoteToClipboard(note);
    expect(writeText).toHaveBeenCalledWith(renderNoteText(note));
    vi.unstubAllGlobals();
  });
});
