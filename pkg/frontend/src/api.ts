/**
 * Typed client for the question-answering service. Everything the UI knows
 * about an answer comes from these endpoints; the client performs no
 * scoring of its own.
 */

export type Badge = "validated" | "raw" | "degraded";

export interface AskReply {
  final: string;
  transcript_id: string;
  badge: Badge;
}

/** Transcript shape returned by GET /transcripts/{id}. Pairs are [question, answer]. */
export interface Transcript {
  question: string;
  qtype: string;
  referenced_issues: number[];
  ablated: string[];
  preprocessing: { transformed_question: string; instruction_used: string | null };
  planning: Record<string, unknown> | null;
  retrieval: {
    k: number;
    template_id: string;
    hits: Array<{ repo: string; number: number; score: number; forced: boolean }>;
  };
  initial_response: string;
  validation: {
    initial_question: string;
    initial_response: string;
    cove_followups: Array<[string, string]>;
    cove_intermediate: string;
    mt_mutations: Array<[string, string]>;
    final_response: string;
    adjudication_notes: string[];
  } | null;
  final_response: string;
  notes: string[];
}

export interface IssueRow {
  repo?: string;
  number?: number;
  title?: string;
  state?: string;
  labels?: string[];
  [key: string]: unknown;
}

export interface HealthReply {
  status: string;
  issues: number;
}

/** Error body the service sends for 4xx/5xx responses. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "unknown";
  let message = response.statusText;
  try {
    const body = (await response.json()) as { error?: string; message?: string };
    if (body.error) code = body.error;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, code, message);
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async ask(question: string, validate = true): Promise<AskReply> {
    const response = await this.fetchFn(`${this.baseUrl}/ask`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question, validate }),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as AskReply;
  }

  async transcript(id: string): Promise<Transcript> {
    const response = await this.fetchFn(`${this.baseUrl}/transcripts/${encodeURIComponent(id)}`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as Transcript;
  }

  async issues(params: Record<string, string>): Promise<{ issues: IssueRow[]; count: number }> {
    const query = new URLSearchParams(params).toString();
    const response = await this.fetchFn(`${this.baseUrl}/issues?${query}`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as { issues: IssueRow[]; count: number };
  }

  async health(): Promise<HealthReply> {
    const response = await this.fetchFn(`${this.baseUrl}/health`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as HealthReply;
  }
}
