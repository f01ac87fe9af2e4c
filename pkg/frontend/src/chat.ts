/**
 * Conversation state for one chat session.
 *
 * Submissions append an optimistic question bubble immediately, so turn
 * order on screen always equals submission order. Requests go out one at a
 * time through a FIFO queue; a turn that fails keeps its place and carries
 * an error for the retry affordance instead of being dropped.
 */

import type { AskReply, Badge } from "./api.js";

export type TurnStatus = "pending" | "answered" | "failed";

export interface ChatTurn {
  id: number;
  question: string;
  validate: boolean;
  status: TurnStatus;
  answer?: string;
  transcriptId?: string;
  badge?: Badge;
  elapsedMs?: number;
  error?: string;
}

export interface AskClient {
  ask(question: string, validate: boolean): Promise<AskReply>;
}

export class ChatSession {
  private readonly turns: ChatTurn[] = [];
  private readonly queue: ChatTurn[] = [];
  private inflight = false;
  private nextId = 1;

  constructor(
    private readonly client: AskClient,
    private readonly onChange: (turns: readonly ChatTurn[]) => void = () => {},
  ) {}

  list(): readonly ChatTurn[] {
    return this.turns;
  }

  /** Append a question bubble and enqueue its request. */
  submit(question: string, validate = true): ChatTurn {
    const text = question.trim();
    if (!text) throw new Error("question must be non-empty");
    const turn: ChatTurn = {
      id: this.nextId++,
      question: text,
      validate,
      status: "pending",
    };
    this.turns.push(turn);
    this.queue.push(turn);
    this.onChange(this.turns);
    void this.pump();
    return turn;
  }

  /** Re-send a failed turn in place; its position on screen is unchanged. */
  retry(turnId: number): void {
    const turn = this.turns.find((t) => t.id === turnId);
    if (!turn || turn.status !== "failed") return;
    turn.status = "pending";
    turn.error = undefined;
    this.queue.push(turn);
    this.onChange(this.turns);
    void this.pump();
  }

  private async pump(): Promise<void> {
    if (this.inflight) return;
    const turn = this.queue.shift();
    if (!turn) return;
    this.inflight = true;
    const started = Date.now();
    try {
      const reply = await this.client.ask(turn.question, turn.validate);
      turn.status = "answered";
      turn.answer = reply.final;
      turn.transcriptId = reply.transcript_id;
      turn.badge = reply.badge;
      turn.elapsedMs = Date.now() - started;
    } catch (error) {
      turn.status = "failed";
      turn.error = error instanceof Error ? error.message : String(error);
    } finally {
      this.inflight = false;
      this.onChange(this.turns);
      void this.pump();
    }
  }
}
