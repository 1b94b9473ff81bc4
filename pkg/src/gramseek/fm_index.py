"""The compressed full-text self-index.

Stores the F-column counts, a wavelet tree over the Burrows-Wheeler
transform, sampled rotation positions for locating, and document-boundary
tables; the original text is not stored and can be reconstructed from the
transform alone.

Orientation: the index is built over the *reversed* concatenated text.
Feeding tokens of an ngram left to right through backward_extend then
prepends them to the internal (reversed) pattern, so the resulting row
range matches the forward ngram exactly. This is what makes right
extension O(log V) per token and successor enumeration O(V log V) during
generation; all public results (counts, locations, reconstruction) are
reported in forward-text coordinates. Each encoded document is terminated
by the end-of-string id, which is the smallest symbol, so rotation sorting
is well-defined across document boundaries.

A built index is immutable: every query operation is read-only and safe
under unbounded concurrent readers.
"""

from __future__ import annotations

import hashlib
import pickle
import struct
import zlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from gramseek.corpus import Corpus, encode_document
from gramseek.suffixes import bwt_from_order, rotation_order
from gramseek.bitvector import BitVector
from gramseek.vocab import END_OF_STRING_ID, Vocabulary
from gramseek.wavelet import WaveletTree

_MAGIC = b"GSFM"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIQ")  # magic, version, sa_rate, alphabet, payload length


@dataclass(frozen=True)
class RowRange:
    """Half-open range of rows in the sorted-rotations matrix.

    depth is the number of tokens fed so far (the matched pattern length),
    which locate needs to map match ends back to start offsets.
    """

    lo: int
    hi: int
    depth: int = 0

    @property
    def width(self) -> int:
        return self.hi - self.lo

    @property
    def empty(self) -> bool:
        return self.hi <= self.lo


@dataclass(frozen=True)
class Occurrence:
    doc_id: str
    offset: int  # token offset of the match start within the encoded document
    is_title: bool


class FmIndex:
    def __init__(self) -> None:
        raise TypeError("use FmIndex.build(...) or FmIndex.load(...)")

    # -- construction -----------------------------------------------------

    @classmethod
    def build(
        cls,
        sequences: Sequence[Sequence[int]],
        *,
        vocabulary: Optional[Vocabulary] = None,
        alphabet_size: Optional[int] = None,
        sa_rate: int = 32,
        doc_ids: Optional[list[str]] = None,
        page_ids: Optional[list[str]] = None,
        sep_offsets: Optional[list[int]] = None,
        total_body_tokens: Optional[int] = None,
        max_bits: int = 24,
    ) -> "FmIndex":
        """Index the given encoded documents (terminators appended here).

        sequences are encoded documents without terminators. Building is
        exclusive and deterministic; the result is immutable.
        """
        if not sequences:
            raise ValueError("cannot index an empty corpus")
        if sa_rate < 1:
            raise ValueError("sa_rate must be >= 1")
        if alphabet_size is None:
            if vocabulary is None:
                raise ValueError("need vocabulary or alphabet_size")
            alphabet_size = len(vocabulary)
        bits = max(1, int(np.ceil(np.log2(max(alphabet_size, 2)))))
        if bits > max_bits:
            raise ValueError(
                f"alphabet size {alphabet_size} exceeds the {max_bits}-bit wavelet-tree bound"
            )

        parts = []
        doc_enc_lens = []
        for seq in sequences:
            arr = np.asarray(seq, dtype=np.int64)
            if arr.size and (arr.min() < 0 or arr.max() >= alphabet_size):
                raise ValueError("token id outside the alphabet")
            parts.append(arr)
            parts.append(np.array([END_OF_STRING_ID], dtype=np.int64))
            doc_enc_lens.append(len(arr))
        forward = np.concatenate(parts)
        internal = forward[::-1].copy()
        n = len(internal)

        order = rotation_order(internal)
        bwt_seq = bwt_from_order(internal, order)

        ix = cls.__new__(cls)
        ix.vocabulary = vocabulary
        ix.sa_rate = int(sa_rate)
        ix.alphabet_size = int(alphabet_size)
        ix.bits = bits
        ix.n = n
        ix.symbol_counts = np.bincount(internal, minlength=alphabet_size).astype(np.int64)
        ix.f_counts = np.zeros(alphabet_size + 1, dtype=np.int64)
        np.cumsum(ix.symbol_counts, out=ix.f_counts[1:])
        ix.bwt = WaveletTree(bwt_seq, bits)

        marked = (order % ix.sa_rate) == 0
        ix.sample_marks = BitVector(marked)
        ix.sample_pos = order[marked].astype(np.int64)
        ix.row_of_pos0 = int(np.flatnonzero(order == 0)[0])

        enc_lens = np.asarray(doc_enc_lens, dtype=np.int64)
        ix.doc_starts = np.zeros(len(enc_lens), dtype=np.int64)
        np.cumsum(enc_lens[:-1] + 1, out=ix.doc_starts[1:])
        ix.doc_enc_lens = enc_lens
        if sep_offsets is None:
            sep_offsets = [-1] * len(enc_lens)
        ix.sep_offsets = np.asarray(sep_offsets, dtype=np.int64)
        ix.doc_ids = list(doc_ids) if doc_ids else [f"d{i}" for i in range(len(enc_lens))]
        ix.page_ids = list(page_ids) if page_ids else list(ix.doc_ids)
        if total_body_tokens is None:
            total_body_tokens = int(enc_lens.sum())
        ix.total_body_tokens = int(total_body_tokens)
        ix._lf = None
        ix._bwt_ids = None
        return ix

    # -- core queries ------------------------------------------------------

    def full_range(self) -> RowRange:
        return RowRange(0, self.n, 0)

    def backward_extend(self, rng: RowRange, token: int) -> RowRange:
        """Narrow rng to the rows additionally matching `token`.

        Feeding the tokens of an ngram left to right yields the range of
        that ngram; the cost per call is independent of corpus length.
        """
        if token < 0 or token >= self.alphabet_size:
            raise ValueError(f"token id {token} outside the alphabet")
        if rng.empty:
            return RowRange(rng.lo, rng.lo, rng.depth + 1)
        r_lo, r_hi = self.bwt.rank_pair(token, rng.lo, rng.hi)
        base = int(self.f_counts[token])
        return RowRange(base + r_lo, base + r_hi, rng.depth + 1)

    def range_of(self, ngram: Sequence[int]) -> RowRange:
        rng = self.full_range()
        for token in ngram:
            rng = self.backward_extend(rng, token)
            if rng.empty:
                return RowRange(rng.lo, rng.lo, len(ngram))
        return rng

    def count(self, ngram: Sequence[int]) -> int:
        """Occurrences of the ngram in the concatenated text.

        Equals the corpus ngram frequency for ngrams free of reserved ids
        (reserved-id patterns use the cyclic rotation semantics).
        """
        if len(ngram) == 0:
            raise ValueError("ngram must be non-empty")
        return self.range_of(ngram).width

    def successors(self, rng: RowRange) -> dict[int, int]:
        """Tokens that can extend the matched pattern on the right, with counts.

        Counts sum to the range width; the empty range yields an empty map.
        """
        if rng.empty:
            return {}
        if rng.lo == 0 and rng.hi == self.n:
            return {int(t): int(c) for t, c in enumerate(self.symbol_counts) if c}
        return self.bwt.range_distinct(rng.lo, rng.hi)

    def locate(self, rng: RowRange) -> list[Occurrence]:
        """One Occurrence per row, resolved through the sampled positions.

        Order is unspecified but deterministic; the result is complete.
        """
        if rng.empty:
            return []
        starts = self.locate_starts(rng)
        doc_idx, offsets, is_title = self._map_positions(starts)
        return [
            Occurrence(self.doc_ids[d], int(off), bool(t))
            for d, off, t in zip(doc_idx, offsets, is_title)
        ]

    def locate_starts(self, rng: RowRange) -> np.ndarray:
        """Forward start positions (concatenated-text coordinates) for rng."""
        return self.locate_starts_batch([rng])[0]

    def locate_starts_batch(self, ranges: Sequence[RowRange]) -> list[np.ndarray]:
        """locate_starts for many ranges sharing one vectorized walk."""
        sizes = [max(r.width, 0) for r in ranges]
        if sum(sizes) == 0:
            return [np.empty(0, dtype=np.int64) for _ in ranges]
        rows = np.concatenate([np.arange(r.lo, r.hi, dtype=np.int64)
                               for r in ranges if r.width > 0])
        internal = self._resolve_rows(rows)
        out = []
        at = 0
        for rng, size in zip(ranges, sizes):
            chunk = internal[at: at + size]
            out.append((self.n - chunk - rng.depth) % self.n)
            at += size
        return out

    def _resolve_rows(self, rows: np.ndarray) -> np.ndarray:
        """Internal rotation-start positions for the given rows (LF walk)."""
        out = np.empty(len(rows), dtype=np.int64)
        cur = rows.copy()
        pending = np.arange(len(rows))
        for step in range(self.sa_rate + 1):
            hit = self.sample_marks.get_bulk(cur) == 1
            if hit.any():
                hit_rows = cur[hit]
                out[pending[hit]] = self.sample_pos[self.sample_marks.rank1_bulk(hit_rows)] + step
                keep = ~hit
                cur = cur[keep]
                pending = pending[keep]
                if not len(cur):
                    return out
            sym, r = self.bwt.access_and_rank_bulk(cur)
            cur = self.f_counts[sym] + r
        raise AssertionError("sampled-position walk exceeded sa_rate steps")

    def _map_positions(self, starts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        doc_idx = np.searchsorted(self.doc_starts, starts, side="right") - 1
        offsets = starts - self.doc_starts[doc_idx]
        is_title = offsets < self.sep_offsets[doc_idx]
        return doc_idx, offsets, is_title

    # -- reconstruction ----------------------------------------------------

    def bwt_ids(self) -> np.ndarray:
        """The stored transform as token ids (last column of the matrix)."""
        if self._bwt_ids is None:
            self._bwt_ids = self.bwt.decode_all()
        return self._bwt_ids

    def _lf_array(self) -> np.ndarray:
        if self._lf is None:
            order = np.argsort(self.bwt_ids(), kind="stable")
            lf = np.empty(self.n, dtype=np.int64)
            lf[order] = np.arange(self.n)
            self._lf = lf
        return self._lf

    def reconstruct(self) -> np.ndarray:
        """Invert the transform, returning the forward concatenated text."""
        bwt = self.bwt_ids()
        lf = self._lf_array()
        out = np.empty(self.n, dtype=np.int64)
        i = self.row_of_pos0
        for t in range(self.n):
            out[t] = bwt[i]
            i = lf[i]
        return out

    def documents(self) -> list[tuple[str, str, np.ndarray]]:
        """(doc_id, page_id, encoded tokens without terminator) per document."""
        text = self.reconstruct()
        out = []
        for i, doc_id in enumerate(self.doc_ids):
            start = int(self.doc_starts[i])
            enc = text[start: start + int(self.doc_enc_lens[i])]
            out.append((doc_id, self.page_ids[i], enc))
        return out

    # -- persistence -------------------------------------------------------

    def save(self, path: str) -> None:
        payload = {
            "bits": self.bits,
            "n": self.n,
            "symbol_counts": self.symbol_counts,
            "level_words": self.bwt.level_words(),
            "sample_mark_words": self.sample_marks.words,
            "sample_pos": _shrink(self.sample_pos),
            "row_of_pos0": self.row_of_pos0,
            "doc_starts": _shrink(self.doc_starts),
            "doc_enc_lens": _shrink(self.doc_enc_lens),
            "sep_offsets": self.sep_offsets.astype(np.int32),
            "doc_ids": self.doc_ids,
            "page_ids": self.page_ids,
            "total_body_tokens": self.total_body_tokens,
            "vocab": self.vocabulary.to_bytes() if self.vocabulary else None,
        }
        blob = zlib.compress(pickle.dumps(payload, protocol=4), 6)
        digest = hashlib.sha256(blob).digest()
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, _VERSION, self.sa_rate, self.alphabet_size, len(blob)))
            fh.write(digest)
            fh.write(blob)

    @classmethod
    def load(cls, path: str) -> "FmIndex":
        with open(path, "rb") as fh:
            head = fh.read(_HEADER.size)
            if len(head) < _HEADER.size:
                raise ValueError(f"{path}: truncated index file")
            magic, version, sa_rate, alphabet, blob_len = _HEADER.unpack(head)
            if magic != _MAGIC:
                raise ValueError(f"{path}: not an index file (bad magic bytes)")
            if version != _VERSION:
                raise ValueError(f"{path}: unsupported index version {version}")
            digest = fh.read(32)
            blob = fh.read(blob_len)
            if len(digest) < 32 or len(blob) < blob_len:
                raise ValueError(f"{path}: truncated index file")
            if hashlib.sha256(blob).digest() != digest:
                raise ValueError(f"{path}: checksum mismatch (corrupt index)")
        payload = pickle.loads(zlib.decompress(blob))

        ix = cls.__new__(cls)
        ix.sa_rate = int(sa_rate)
        ix.alphabet_size = int(alphabet)
        ix.bits = int(payload["bits"])
        ix.n = int(payload["n"])
        ix.symbol_counts = np.asarray(payload["symbol_counts"], dtype=np.int64)
        ix.f_counts = np.zeros(ix.alphabet_size + 1, dtype=np.int64)
        np.cumsum(ix.symbol_counts, out=ix.f_counts[1:])
        ix.bwt = WaveletTree.from_level_words(payload["level_words"], ix.n, ix.bits)
        n_mark_words = (ix.n + 63) // 64
        ix.sample_marks = BitVector.from_words(payload["sample_mark_words"][:n_mark_words], ix.n)
        ix.sample_pos = np.asarray(payload["sample_pos"], dtype=np.int64)
        ix.row_of_pos0 = int(payload["row_of_pos0"])
        ix.doc_starts = np.asarray(payload["doc_starts"], dtype=np.int64)
        ix.doc_enc_lens = np.asarray(payload["doc_enc_lens"], dtype=np.int64)
        ix.sep_offsets = np.asarray(payload["sep_offsets"], dtype=np.int64)
        ix.doc_ids = list(payload["doc_ids"])
        ix.page_ids = list(payload["page_ids"])
        ix.total_body_tokens = int(payload["total_body_tokens"])
        ix.vocabulary = (
            Vocabulary.from_bytes(payload["vocab"]) if payload["vocab"] is not None else None
        )
        ix._lf = None
        ix._bwt_ids = None
        return ix


def _shrink(arr: np.ndarray) -> np.ndarray:
    """Store index arrays in the narrowest sufficient unsigned dtype."""
    if arr.size == 0 or arr.min() >= 0:
        hi = int(arr.max()) if arr.size else 0
        for dt in (np.uint16, np.uint32):
            if hi < np.iinfo(dt).max:
                return arr.astype(dt)
    return arr.astype(np.int64)


def build_index(corpus: Corpus, sa_rate: int = 32) -> FmIndex:
    """Index a corpus: each document encoded as title ++ [sep] ++ body."""
    sequences = [encode_document(d) for d in corpus.documents]
    return FmIndex.build(
        sequences,
        vocabulary=corpus.vocabulary,
        sa_rate=sa_rate,
        doc_ids=[d.doc_id for d in corpus.documents],
        page_ids=[d.page_id for d in corpus.documents],
        sep_offsets=[len(d.title) for d in corpus.documents],
        total_body_tokens=corpus.total_body_tokens,
    )
