/**
 * Transcript panel view model and renderer.
 *
 * The panel lists the pipeline stages in the order they ran: initial
 * response, verification follow-ups, intermediate answer, question
 * mutations, final response. Lines are copied verbatim from the service
 * transcript; skip notes come from the service's own notes field.
 */

import type { Transcript } from "./api.js";

export interface StageSection {
  label: string;
  lines: string[];
}

export const STAGE_LABELS = [
  "Initial response",
  "Verification follow-ups",
  "Intermediate answer",
  "Question mutations",
  "Final response",
] as const;

function pairLines(pairs: Array<[string, string]>): string[] {
  const lines: string[] = [];
  for (const [question, answer] of pairs) {
    lines.push(`Q: ${question}`);
    lines.push(`A: ${answer}`);
  }
  return lines;
}

function notesFor(notes: string[], prefix: string, fallback: string): string[] {
  const matched = notes.filter((note) => note.startsWith(prefix));
  return matched.length > 0 ? matched : [fallback];
}

export function buildTranscriptView(transcript: Transcript): StageSection[] {
  const validation = transcript.validation;
  if (validation === null) {
    const off = "validation was turned off for this turn";
    return [
      { label: STAGE_LABELS[0], lines: [transcript.initial_response] },
      { label: STAGE_LABELS[1], lines: [off] },
      { label: STAGE_LABELS[2], lines: [off] },
      { label: STAGE_LABELS[3], lines: [off] },
      { label: STAGE_LABELS[4], lines: [transcript.final_response] },
    ];
  }
  return [
    { label: STAGE_LABELS[0], lines: [transcript.initial_response] },
    {
      label: STAGE_LABELS[1],
      lines:
        validation.cove_followups.length > 0
          ? pairLines(validation.cove_followups)
          : notesFor(transcript.notes, "cove", "no follow-up questions recorded"),
    },
    { label: STAGE_LABELS[2], lines: [validation.cove_intermediate] },
    {
      label: STAGE_LABELS[3],
      lines:
        validation.mt_mutations.length > 0
          ? pairLines(validation.mt_mutations)
          : notesFor(transcript.notes, "mt", "no question mutations recorded"),
    },
    { label: STAGE_LABELS[4], lines: [transcript.final_response] },
  ];
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderTranscript(transcript: Transcript): string {
  const sections = buildTranscriptView(transcript)
    .map(
      (section) => `
  <section class="stage">
    <h3>${escapeHtml(section.label)}</h3>
    ${section.lines.map((line) => `<p>${escapeHtml(line)}</p>`).join("\n    ")}
  </section>`,
    )
    .join("\n");
  return `<div class="transcript">${sections}\n</div>`;
}

export function renderStaleNotice(transcriptId: string): string {
  return `<div class="transcript stale">transcript ${escapeHtml(transcriptId)} is no longer available (the service may have restarted)</div>`;
}
