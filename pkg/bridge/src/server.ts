/**
 * The bridge server: accepts connections on a TCP socket, requires a
 * handshake carrying the vocabulary hash (refusing to serve on mismatch),
 * then answers session requests. One decoder state per session; sessions
 * expire after an idle timeout. Connections are independent; within a
 * connection the engine guarantees per-session message ordering.
 */

import { createServer, Server, Socket } from "node:net";
import { Model, ModelState } from "./model.js";
import { PROTOCOL_VERSION, Request, Response, parseRequest, sparsify } from "./protocol.js";
import { Vocabulary } from "./vocab.js";

export interface BridgeOptions {
  topM?: number; // sparse responses keep this many entries; 0 sends dense
  idleTimeoutMs?: number;
}

interface Session {
  state: ModelState;
  lastUsed: number;
}

export class BridgeServer {
  private readonly server: Server;
  private readonly sessions = new Map<string, Session>();
  private readonly topM: number;
  private readonly idleTimeoutMs: number;
  private reaper?: NodeJS.Timeout;

  constructor(
    private readonly model: Model,
    private readonly vocabulary: Vocabulary,
    options: BridgeOptions = {},
  ) {
    if (model.vocabSize !== vocabulary.size) {
      throw new Error(
        `model vocabulary (${model.vocabSize}) does not match the file (${vocabulary.size})`,
      );
    }
    this.topM = options.topM ?? 256;
    this.idleTimeoutMs = options.idleTimeoutMs ?? 300_000;
    this.server = createServer((socket) => this.handleConnection(socket));
  }

  listen(port: number, host = "127.0.0.1"): Promise<number> {
    return new Promise((resolve, reject) => {
      this.server.once("error", reject);
      this.server.listen(port, host, () => {
        const addr = this.server.address();
        if (addr === null || typeof addr === "string") {
          reject(new Error("unexpected server address"));
          return;
        }
        const reapEvery = Math.min(Math.max(this.idleTimeoutMs / 4, 25), 60_000);
        this.reaper = setInterval(() => this.evictIdle(), reapEvery);
        this.reaper.unref();
        resolve(addr.port);
      });
    });
  }

  close(): void {
    if (this.reaper) {
      clearInterval(this.reaper);
    }
    this.server.close();
  }

  get sessionCount(): number {
    return this.sessions.size;
  }

  private evictIdle(): void {
    const cutoff = Date.now() - this.idleTimeoutMs;
    for (const [sid, session] of this.sessions) {
      if (session.lastUsed < cutoff) {
        this.sessions.delete(sid);
      }
    }
  }

  private handleConnection(socket: Socket): void {
    let buffer = "";
    let greeted = false;
    const send = (response: Response) => {
      socket.write(JSON.stringify(response) + "\n");
    };
    socket.on("error", () => socket.destroy());
    socket.on("data", (chunk) => {
      buffer += chunk.toString("utf-8");
      let nl;
      while ((nl = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, nl);
        buffer = buffer.slice(nl + 1);
        if (!line.trim()) {
          continue;
        }
        const parsed = parseRequest(line);
        if ("error" in parsed) {
          send({ error: parsed.error });
          continue;
        }
        if (!greeted) {
          if (parsed.op !== "hello") {
            send({ ok: false, error: "handshake required before any other request" });
            continue;
          }
          const reply = this.handleHello(parsed);
          send(reply);
          if ("ok" in reply && reply.ok) {
            greeted = true;
          } else {
            socket.end();
          }
          continue;
        }
        if (parsed.op === "hello") {
          send(this.handleHello(parsed));
          continue;
        }
        send(this.handleSession(parsed));
      }
    });
  }

  private handleHello(msg: Request & { op: "hello" }): Response {
    if (msg.protocol !== undefined && msg.protocol !== PROTOCOL_VERSION) {
      return { ok: false, error: `unsupported protocol version ${msg.protocol}` };
    }
    if (msg.vocab_size !== this.vocabulary.size) {
      return { ok: false, error: "vocabulary size mismatch" };
    }
    if (msg.vocab_hash !== this.vocabulary.contentHash()) {
      return { ok: false, error: "vocabulary hash mismatch" };
    }
    return { ok: true, model: this.model.name, protocol: PROTOCOL_VERSION };
  }

  private handleSession(msg: Request & { op: "start" | "next" | "advance" | "end" }): Response {
    const sid = msg.session_id;
    if (msg.op === "start") {
      const queryIds = (msg.query_ids ?? []).map((t) => Number(t));
      if (queryIds.some((t) => !Number.isInteger(t) || t < 0 || t >= this.model.vocabSize)) {
        return { session_id: sid, error: "query token outside the vocabulary" };
      }
      this.sessions.set(sid, { state: this.model.start(queryIds), lastUsed: Date.now() });
      return { session_id: sid, ok: true };
    }
    const session = this.sessions.get(sid);
    if (!session) {
      return { session_id: sid, error: `unknown session ${JSON.stringify(sid)}` };
    }
    session.lastUsed = Date.now();
    if (msg.op === "advance") {
      const token = Number(msg.token);
      if (!Number.isInteger(token) || token < 0 || token >= this.model.vocabSize) {
        return { session_id: sid, error: "token outside the vocabulary" };
      }
      this.model.advance(session.state, token);
      return { session_id: sid, ok: true };
    }
    if (msg.op === "end") {
      this.sessions.delete(sid);
      return { session_id: sid, ok: true };
    }
    const dense = this.model.nextLogprobs(session.state);
    if (this.topM > 0 && this.topM < dense.length) {
      return { session_id: sid, logprobs: sparsify(dense, this.topM) };
    }
    return { session_id: sid, logprobs: { dense: Array.from(dense) } };
  }
}
