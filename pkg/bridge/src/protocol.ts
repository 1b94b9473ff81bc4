/**
 * Wire messages: newline-delimited JSON, one request per line, one
 * response per request. Responses echo the session id and carry {ok},
 * {logprobs} or {error}; a malformed line yields an error response and
 * never corrupts session state.
 */

export const PROTOCOL_VERSION = 1;

export interface HelloRequest {
  op: "hello";
  protocol?: number;
  vocab_hash: string;
  vocab_size: number;
}

export interface SessionRequest {
  op: "start" | "next" | "advance" | "end";
  session_id: string;
  query_ids?: number[];
  token?: number;
}

export type Request = HelloRequest | SessionRequest;

export interface SparseLogprobs {
  top: Array<[number, number]>;
  /** log of the probability mass not covered by `top`, or null if none */
  rest_logprob: number | null;
}

export type Response =
  | { ok: true; model: string; protocol: number }
  | { ok: false; error: string }
  | { session_id: string; ok: true }
  | { session_id: string; logprobs: { dense: number[] } | SparseLogprobs }
  | { session_id?: string; error: string };

export function parseRequest(line: string): Request | { error: string } {
  let msg: unknown;
  try {
    msg = JSON.parse(line);
  } catch {
    return { error: "malformed message: not valid JSON" };
  }
  if (typeof msg !== "object" || msg === null || Array.isArray(msg)) {
    return { error: "malformed message: expected an object" };
  }
  const rec = msg as Record<string, unknown>;
  const op = rec.op;
  if (op === "hello") {
    if (typeof rec.vocab_hash !== "string" || typeof rec.vocab_size !== "number") {
      return { error: "hello needs vocab_hash and vocab_size" };
    }
    return rec as unknown as HelloRequest;
  }
  if (op === "start" || op === "next" || op === "advance" || op === "end") {
    if (typeof rec.session_id !== "string") {
      return { error: `${op} needs a session_id` };
    }
    if (op === "start" && !Array.isArray(rec.query_ids)) {
      return { error: "start needs query_ids" };
    }
    if (op === "advance" && typeof rec.token !== "number") {
      return { error: "advance needs a token" };
    }
    return rec as unknown as SessionRequest;
  }
  return { error: `unknown op ${JSON.stringify(op)}` };
}

/**
 * Encode a dense log-distribution as the top-m entries plus the log of
 * the remaining mass (spread uniformly by the client over unsent ids).
 */
export function sparsify(dense: Float64Array, topM: number): SparseLogprobs {
  const order = Array.from(dense.keys()).sort((a, b) => dense[b] - dense[a]);
  const kept = order.slice(0, Math.min(topM, dense.length));
  const sent = new Set(kept);
  let restMass = 0;
  for (let t = 0; t < dense.length; t++) {
    if (!sent.has(t)) {
      restMass += Math.exp(dense[t]);
    }
  }
  return {
    top: kept.map((t) => [t, dense[t]]),
    rest_logprob: restMass > 0 ? Math.log(restMass) : null,
  };
}
