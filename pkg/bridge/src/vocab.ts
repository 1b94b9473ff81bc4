/**
 * Vocabulary file loading and the content hash used in the handshake.
 *
 * The file format is a `#`-prefixed header followed by one token per
 * line, line number = id. The hash is sha256 over the canonical
 * serialization (header + tokens, LF-terminated), so both ends of the
 * protocol can compute it from a parsed vocabulary regardless of how the
 * bytes arrived.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

export const RESERVED_TOKENS = ["<eos>", "<sep>", "<sup>", "<unsup>", "<span>", "<title>"];
const HEADER_MAGIC = "#gramseek-vocab v1";
const HEADER_RESERVED =
  "#reserved end_of_string=0 separator=1 supervised=2 unsupervised=3 span=4 title=5";

export class Vocabulary {
  readonly tokens: string[];

  constructor(tokens: string[]) {
    for (let i = 0; i < RESERVED_TOKENS.length; i++) {
      if (tokens[i] !== RESERVED_TOKENS[i]) {
        throw new Error(`vocabulary reserved block is malformed at id ${i}`);
      }
    }
    this.tokens = tokens;
  }

  get size(): number {
    return this.tokens.length;
  }

  /** Canonical serialization; the input of contentHash(). */
  toBytes(): Buffer {
    const lines = [HEADER_MAGIC, HEADER_RESERVED, ...this.tokens];
    return Buffer.from(lines.join("\n") + "\n", "utf-8");
  }

  contentHash(): string {
    return createHash("sha256").update(this.toBytes()).digest("hex");
  }

  static fromBytes(data: Buffer): Vocabulary {
    const lines = data.toString("utf-8").split("\n");
    if (lines.length && lines[lines.length - 1] === "") {
      lines.pop();
    }
    if (!lines.length || !lines[0].startsWith("#gramseek-vocab")) {
      throw new Error("not a vocabulary file (missing header)");
    }
    return new Vocabulary(lines.filter((ln) => !ln.startsWith("#")));
  }

  static load(path: string): Vocabulary {
    return Vocabulary.fromBytes(readFileSync(path));
  }
}
