import { describe, expect, it } from "vitest";

import { ApiError, ServiceClient } from "../src/api.js";

type Call = { url: string; init?: RequestInit };

function fakeFetch(status: number, body: unknown, calls: Call[] = []): typeof fetch {
  return (async (url: RequestInfo | URL, init?: RequestInit) => {
    calls.push({ url: String(url), init });
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }) as typeof fetch;
}

describe("ServiceClient.ask", () => {
  it("posts the question with the validate flag", async () => {
    const calls: Call[] = [];
    const reply = { final: "Yes.", transcript_id: "abc123", badge: "validated" };
    const client = new ServiceClient("http://svc", fakeFetch(200, reply, calls));
    const got = await client.ask("Is it broken?", false);
    expect(got).toEqual(reply);
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe("http://svc/ask");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      question: "Is it broken?",
      validate: false,
    });
  });

  it("maps service error bodies onto ApiError", async () => {
    const client = new ServiceClient(
      "",
      fakeFetch(502, { error: "MissingScriptError", message: "no entry" }),
    );
    const failure = await client.ask("Is it broken?").catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.status).toBe(502);
    expect(failure.code).toBe("MissingScriptError");
    expect(failure.message).toBe("no entry");
  });

  it("tolerates non-JSON error bodies", async () => {
    const brokenFetch = (async () =>
      new Response("gateway exploded", { status: 500, statusText: "Server Error" })) as typeof fetch;
    const client = new ServiceClient("", brokenFetch);
    const failure = await client.ask("Is it broken?").catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.code).toBe("unknown");
  });
});

describe("ServiceClient.transcript", () => {
  it("fetches by id with URL escaping", async () => {
    const calls: Call[] = [];
    const client = new ServiceClient("", fakeFetch(200, { question: "q" }, calls));
    await client.transcript("ab/12");
    expect(calls[0].url).toBe("/transcripts/ab%2F12");
  });

  it("signals a stale id through ApiError status 404", async () => {
    const client = new ServiceClient(
      "",
      fakeFetch(404, { error: "not-found", message: "no transcript" }),
    );
    const failure = await client.transcript("gone").catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.status).toBe(404);
    expect(failure.code).toBe("not-found");
  });
});

describe("ServiceClient.issues and health", () => {
  it("encodes filter params into the query string", async () => {
    const calls: Call[] = [];
    const body = { issues: [{ number: 20155 }], count: 1 };
    const client = new ServiceClient("", fakeFetch(200, body, calls));
    const got = await client.issues({ label: "heap-pressure", limit: "5" });
    expect(got.count).toBe(1);
    expect(calls[0].url).toBe("/issues?label=heap-pressure&limit=5");
  });

  it("reads the health summary", async () => {
    const client = new ServiceClient("", fakeFetch(200, { status: "ok", issues: 5 }));
    expect(await client.health()).toEqual({ status: "ok", issues: 5 });
  });
});
