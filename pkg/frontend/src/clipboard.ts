/** "Copy note" support: render the full note (every section title and body)
 * as plain text and put it on the clipboard for pasting into the EHR. */

import type { Note } from "./types";

export function renderNoteText(note: Note): string {
  return note.sections
    .map((section) => `## ${section.title}\n${section.body}`)
    .join("\n\n");
}

export async function copyNoteToClipboard(note: Note): Promise<void> {
  const text = renderNoteText(note);
  if (navigator.clipboard?.writeText) {
    await navigator.clipboard.writeText(text);
    return;
  }
  // Fallback for contexts where the async clipboard API is unavailable.
  const container = document.createElement("textarea");
  container.value = text;
  document.body.appendChild(container);
  container.select();
  document.execCommand("copy");
  document.body.removeChild(container);
}
