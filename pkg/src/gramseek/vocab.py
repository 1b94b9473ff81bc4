"""Token vocabulary with reserved control ids.

Ids are dense integers. Id 0 is the end-of-string terminator and must stay
the globally smallest symbol so rotation sorting in the index is
well-defined across document boundaries. Ids 1..5 are the remaining
reserved ids (separator plus the four training control tokens); content
tokens start at id 6.
"""

from __future__ import annotations

import hashlib
import re
from typing import Callable, Iterable, Sequence

END_OF_STRING_ID = 0
SEPARATOR_ID = 1
CTRL_SUPERVISED_ID = 2
CTRL_UNSUPERVISED_ID = 3
CTRL_SPAN_ID = 4
CTRL_TITLE_ID = 5
FIRST_CONTENT_ID = 6

RESERVED_TOKENS = ("<eos>", "<sep>", "<sup>", "<unsup>", "<span>", "<title>")
RESERVED_IDS = frozenset(range(FIRST_CONTENT_ID))

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

Tokenizer = Callable[[str], "list[str]"]


def default_tokenizer(text: str) -> list[str]:
    """Lowercase word/punctuation tokenizer. Any callable str -> list[str] works."""
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Bijection between surface tokens and dense integer ids.

    A built Vocabulary is treated as immutable once indexing starts; all
    lookups are read-only and safe to share across threads.
    """

    def __init__(self) -> None:
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(RESERVED_TOKENS)}
        self.id_to_token: list[str] = list(RESERVED_TOKENS)

    def __len__(self) -> int:
        return len(self.id_to_token)

    def add(self, token: str) -> int:
        """Return the id of token, assigning the next free id if unseen."""
        tid = self.token_to_id.get(token)
        if tid is None:
            tid = len(self.id_to_token)
            self.token_to_id[token] = tid
            self.id_to_token.append(token)
        return tid

    def encode(self, tokens: Iterable[str], extend: bool = False) -> list[int]:
        """Map surface tokens to ids.

        With extend=False unknown tokens are dropped: the vocabulary is
        closed over the corpus and out-of-vocabulary query tokens cannot be
        generated anyway.
        """
        ids = []
        for tok in tokens:
            if extend:
                ids.append(self.add(tok))
            else:
                tid = self.token_to_id.get(tok)
                if tid is not None:
                    ids.append(tid)
        return ids

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    def detokenize(self, ids: Sequence[int]) -> str:
        """Space-join surface tokens, skipping reserved ids."""
        return " ".join(self.id_to_token[i] for i in ids if i not in RESERVED_IDS)

    def is_reserved(self, token_id: int) -> bool:
        return token_id < FIRST_CONTENT_ID

    def validate(self) -> None:
        """Check the bijection and the reserved block."""
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("token_to_id and id_to_token disagree in size")
        for tok, tid in self.token_to_id.items():
            if self.id_to_token[tid] != tok:
                raise ValueError(f"id {tid} maps back to {self.id_to_token[tid]!r}, not {tok!r}")
        if tuple(self.id_to_token[:FIRST_CONTENT_ID]) != RESERVED_TOKENS:
            raise ValueError("reserved id block was modified")

    # -- persistence ----------------------------------------------------

    def to_bytes(self) -> bytes:
        """Canonical serialization; also the input of content_hash()."""
        lines = ["#gramseek-vocab v1"]
        lines.append(
            "#reserved end_of_string=0 separator=1 supervised=2 unsupervised=3 span=4 title=5"
        )
        lines.extend(self.id_to_token)
        return ("\n".join(lines) + "\n").encode("utf-8")

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "Vocabulary":
        lines = data.decode("utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines or not lines[0].startswith("#gramseek-vocab"):
            raise ValueError("not a vocabulary file (missing header)")
        body = [ln for ln in lines if not ln.startswith("#")]
        if tuple(body[:FIRST_CONTENT_ID]) != RESERVED_TOKENS:
            raise ValueError("vocabulary file has an unexpected reserved block")
        vocab = cls()
        for tok in body[FIRST_CONTENT_ID:]:
            vocab.add(tok)
        vocab.validate()
        return vocab

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def content_hash(self) -> str:
        """Hex sha256 of the canonical serialization; used in LM-backend handshakes."""
        return hashlib.sha256(self.to_bytes()).hexdigest()
