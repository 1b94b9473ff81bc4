"""Client for external language-model backends over a line protocol.

Messages are newline-delimited JSON over a local TCP or unix socket. The
client speaks first with a handshake carrying the protocol version and the
vocabulary content hash; the server answers with its model name or refuses
on a vocabulary mismatch. Session requests are {session_id, op:
start|next|advance|end, query_ids?, token?}; responses echo the
session_id and carry either {ok}, {logprobs}, or {error}.

Next-token distributions arrive dense or sparse: sparse responses send the
top-m (id, logprob) pairs plus the log of the remaining probability mass,
which the client spreads uniformly over the unsent ids. Densified vectors
must be normalized within 1e-4 and are exactly renormalized before use.

The resulting object satisfies the same {start, next_logprobs, advance}
contract as the builtin model, so backends are interchangeable.
"""

from __future__ import annotations

import itertools
import json
import socket
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from gramseek.vocab import Vocabulary

PROTOCOL_VERSION = 1
NORMALIZATION_TOL = 1e-4


class BridgeError(RuntimeError):
    pass


@dataclass(frozen=True)
class BridgeSession:
    lm: "BridgeLm"
    query: tuple[int, ...]
    history: tuple[int, ...] = ()
    # Single-slot holder for a server-side session id. advance() hands the
    # parent's server session to the first child; later siblings replay.
    _sid: list = field(default_factory=lambda: [None], repr=False, compare=False)


class BridgeLm:
    """LM backend speaking the bridge protocol; one connection per instance."""

    def __init__(self, sock: socket.socket, vocabulary: Vocabulary):
        self._sock = sock
        self._reader = sock.makefile("r", encoding="utf-8", newline="\n")
        self.vocab_size = len(vocabulary)
        self._ids = itertools.count(1)
        reply = self._request({
            "op": "hello",
            "protocol": PROTOCOL_VERSION,
            "vocab_hash": vocabulary.content_hash(),
            "vocab_size": self.vocab_size,
        })
        if not reply.get("ok"):
            raise BridgeError(f"backend refused handshake: {reply.get('error', 'no reason')}")
        self.model_name = reply.get("model", "unknown")

    @classmethod
    def connect(cls, address: str, vocabulary: Vocabulary, timeout: float = 30.0) -> "BridgeLm":
        """address: "host:port" or "unix:/path/to.sock"."""
        if address.startswith("unix:"):
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            sock.settimeout(timeout)
            sock.connect(address[len("unix:"):])
        else:
            host, _, port = address.rpartition(":")
            if not port.isdigit():
                raise BridgeError(f"bad bridge address {address!r} (want host:port or unix:path)")
            sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
        return cls(sock, vocabulary)

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    # -- LM contract ---------------------------------------------------------

    def start(self, query: Sequence[int]) -> BridgeSession:
        query = tuple(int(t) for t in query)
        if not query:
            raise ValueError("query must be non-empty")
        return BridgeSession(lm=self, query=query)

    def advance(self, session: BridgeSession, token: int) -> BridgeSession:
        token = int(token)
        child = BridgeSession(lm=self, query=session.query,
                              history=session.history + (token,))
        sid = session._sid[0]
        if sid is not None:
            # Steal the parent's server session; siblings will replay.
            session._sid[0] = None
            self._command({"op": "advance", "session_id": sid, "token": token})
            child._sid[0] = sid
        return child

    def next_logprobs(self, session: BridgeSession) -> np.ndarray:
        sid = session._sid[0]
        if sid is None:
            sid = f"s{next(self._ids)}"
            self._command({"op": "start", "session_id": sid,
                           "query_ids": list(session.query)})
            for tok in session.history:
                self._command({"op": "advance", "session_id": sid, "token": int(tok)})
            session._sid[0] = sid
        reply = self._request({"op": "next", "session_id": sid})
        if "error" in reply:
            raise BridgeError(reply["error"])
        return self._densify(reply.get("logprobs"))

    # -- wire helpers -----------------------------------------------------------

    def _request(self, msg: dict) -> dict:
        self._sock.sendall((json.dumps(msg) + "\n").encode("utf-8"))
        line = self._reader.readline()
        if not line:
            raise BridgeError("backend closed the connection")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeError(f"malformed response from backend: {exc}") from None

    def _command(self, msg: dict) -> dict:
        reply = self._request(msg)
        if "error" in reply:
            raise BridgeError(reply["error"])
        return reply

    def _densify(self, logprobs: Optional[dict]) -> np.ndarray:
        if not isinstance(logprobs, dict):
            raise BridgeError("response carries no logprobs")
        if "dense" in logprobs:
            dense = np.asarray(logprobs["dense"], dtype=np.float64)
            if len(dense) != self.vocab_size:
                raise BridgeError("dense logprobs have the wrong length")
        else:
            top = logprobs.get("top", [])
            dense = np.full(self.vocab_size, -np.inf)
            sent = np.zeros(self.vocab_size, dtype=bool)
            for tid, lp in top:
                tid = int(tid)
                if tid < 0 or tid >= self.vocab_size:
                    raise BridgeError(f"token id {tid} outside the vocabulary")
                dense[tid] = float(lp)
                sent[tid] = True
            rest = logprobs.get("rest_logprob")
            n_unsent = int((~sent).sum())
            if rest is not None and n_unsent > 0:
                dense[~sent] = float(rest) - np.log(n_unsent)
        lse = _logsumexp(dense)
        if not np.isfinite(lse) or abs(lse) > NORMALIZATION_TOL:
            raise BridgeError(f"backend distribution off normalization by {lse:.3g}")
        return dense - lse

    def __enter__(self) -> "BridgeLm":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    if m == -np.inf:
        return -np.inf
    return m + float(np.log(np.sum(np.exp(x - m))))
