/**
 * DOM wiring for the chat page: submit box with a validation toggle, one
 * bubble pair per turn, a badge on each answer, and an expandable
 * transcript panel behind every answered turn.
 */

import { ApiError, ServiceClient } from "./api.js";
import { ChatSession, type ChatTurn } from "./chat.js";
import { renderStaleNotice, renderTranscript } from "./transcript.js";

const client = new ServiceClient("");
const openPanels = new Set<number>();

function badgeChip(turn: ChatTurn): string {
  return `<span class="badge badge-${turn.badge}">${turn.badge}</span>`;
}

function renderTurn(turn: ChatTurn): HTMLElement {
  const item = document.createElement("li");
  item.className = `turn turn-${turn.status}`;
  item.dataset.turnId = String(turn.id);

  const question = document.createElement("div");
  question.className = "bubble question";
  question.textContent = turn.question;
  item.appendChild(question);

  const answer = document.createElement("div");
  answer.className = "bubble answer";
  if (turn.status === "pending") {
    answer.textContent = "…";
  } else if (turn.status === "failed") {
    answer.innerHTML = "";
    const note = document.createElement("span");
    note.className = "error";
    note.textContent = `request failed: ${turn.error ?? "unknown error"}`;
    const retry = document.createElement("button");
    retry.type = "button";
    retry.className = "retry";
    retry.textContent = "retry";
    retry.addEventListener("click", () => session.retry(turn.id));
    answer.append(note, " ", retry);
  } else {
    answer.innerHTML = `${badgeChip(turn)} `;
    const text = document.createElement("span");
    text.textContent = turn.answer ?? "";
    answer.appendChild(text);
    if (turn.transcriptId) {
      const toggle = document.createElement("button");
      toggle.type = "button";
      toggle.className = "transcript-toggle";
      toggle.textContent = openPanels.has(turn.id) ? "hide transcript" : "show transcript";
      toggle.addEventListener("click", () => void togglePanel(turn, item));
      answer.append(" ", toggle);
    }
  }
  item.appendChild(answer);
  return item;
}

async function togglePanel(turn: ChatTurn, item: HTMLElement): Promise<void> {
  const existing = item.querySelector(".transcript");
  if (existing) {
    existing.remove();
    openPanels.delete(turn.id);
    redraw(session.list());
    return;
  }
  if (!turn.transcriptId) return;
  let html: string;
  try {
    const transcript = await client.transcript(turn.transcriptId);
    html = renderTranscript(transcript);
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      html = renderStaleNotice(turn.transcriptId);
    } else {
      throw error;
    }
  }
  openPanels.add(turn.id);
  item.insertAdjacentHTML("beforeend", html);
  const toggle = item.querySelector(".transcript-toggle");
  if (toggle) toggle.textContent = "hide transcript";
}

function redraw(turns: readonly ChatTurn[]): void {
  const list = document.getElementById("turns");
  if (!list) return;
  list.replaceChildren(...turns.map(renderTurn));
}

const session = new ChatSession(client, redraw);

window.addEventListener("DOMContentLoaded", () => {
  const form = document.getElementById("ask-form") as HTMLFormElement | null;
  const input = document.getElementById("question") as HTMLInputElement | null;
  const validate = document.getElementById("validate") as HTMLInputElement | null;
  const status = document.getElementById("status");
  if (!form || !input || !validate) return;

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (!input.value.trim()) return;
    session.submit(input.value, validate.checked);
    form.reset();
    validate.checked = true;
  });

  void client
    .health()
    .then((health) => {
      if (status) status.textContent = `${health.issues} issues indexed`;
    })
    .catch(() => {
      if (status) status.textContent = "service unreachable";
    });
});
