/**
 * The model contract the server exposes over the wire, plus the stub
 * backend. A real neural backend implements the same three methods; the
 * server never looks inside the state object.
 */

export interface ModelState {
  queryIds: number[];
  history: number[];
}

export interface Model {
  readonly name: string;
  readonly vocabSize: number;
  start(queryIds: number[]): ModelState;
  advance(state: ModelState, token: number): void;
  /** Normalized log-probabilities over the vocabulary for the next token. */
  nextLogprobs(state: ModelState): Float64Array;
}

/** Uniform logits over the whole vocabulary; the conformance stub. */
export class UniformModel implements Model {
  readonly name = "stub-uniform";
  readonly vocabSize: number;
  private readonly logprob: number;

  constructor(vocabSize: number) {
    this.vocabSize = vocabSize;
    this.logprob = -Math.log(vocabSize);
  }

  start(queryIds: number[]): ModelState {
    return { queryIds: [...queryIds], history: [] };
  }

  advance(state: ModelState, token: number): void {
    state.history.push(token);
  }

  nextLogprobs(_state: ModelState): Float64Array {
    return new Float64Array(this.vocabSize).fill(this.logprob);
  }
}

export function makeModel(kind: string, vocabSize: number): Model {
  if (kind === "stub" || kind === "uniform") {
    return new UniformModel(vocabSize);
  }
  throw new Error(`unknown model kind ${JSON.stringify(kind)}`);
}
