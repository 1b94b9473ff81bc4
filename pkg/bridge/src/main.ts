/**
 * CLI entry point: load the vocabulary, pick a model backend, serve.
 *
 *   node dist/main.js --vocab vocab.txt [--port 0] [--host 127.0.0.1]
 *                     [--model stub] [--top-m 256] [--idle-timeout 300]
 *
 * Prints "listening on <host>:<port>" once ready (port 0 binds an
 * ephemeral port, which callers parse from that line).
 */

import { parseArgs } from "node:util";
import { makeModel } from "./model.js";
import { BridgeServer } from "./server.js";
import { Vocabulary } from "./vocab.js";

async function main(): Promise<void> {
  const { values } = parseArgs({
    options: {
      vocab: { type: "string" },
      port: { type: "string", default: "8765" },
      host: { type: "string", default: "127.0.0.1" },
      model: { type: "string", default: "stub" },
      "top-m": { type: "string", default: "256" },
      "idle-timeout": { type: "string", default: "300" },
    },
  });
  if (!values.vocab) {
    console.error("usage: main.js --vocab <vocab file> [--port N] [--model stub]");
    process.exit(2);
  }
  const vocabulary = Vocabulary.load(values.vocab);
  const model = makeModel(values.model!, vocabulary.size);
  const server = new BridgeServer(model, vocabulary, {
    topM: Number(values["top-m"]),
    idleTimeoutMs: Number(values["idle-timeout"]) * 1000,
  });
  const port = await server.listen(Number(values.port), values.host);
  console.log(`listening on ${values.host}:${port}`);
  console.log(`model=${model.name} vocab_size=${vocabulary.size} hash=${vocabulary.contentHash()}`);
}

main().catch((err) => {
  console.error(err instanceof Error ? err.message : String(err));
  process.exit(1);
});
