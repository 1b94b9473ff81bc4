"""Plain bitvector with O(1) rank, packed in 64-bit words.

Bit i lives at position (i & 63) of word (i >> 6), LSB first. Rank keeps a
cumulative popcount per word, so a query reads one cumulative entry plus
one masked popcount and its cost does not grow with vector length. Bulk
variants vectorize the same computation over numpy position arrays.
"""

from __future__ import annotations

import numpy as np


def popcount(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words)


class BitVector:
    def __init__(self, bits: np.ndarray):
        """bits: boolean or 0/1 array."""
        bits = np.asarray(bits, dtype=bool)
        self.n = len(bits)
        n_words = (self.n + 63) // 64
        padded = np.zeros(n_words * 64, dtype=bool)
        padded[: self.n] = bits
        self.words = np.packbits(padded, bitorder="little").view(np.uint64)
        self._build_rank()

    @classmethod
    def from_words(cls, words: np.ndarray, n: int) -> "BitVector":
        bv = cls.__new__(cls)
        bv.n = n
        bv.words = np.ascontiguousarray(words, dtype=np.uint64)
        bv._build_rank()
        return bv

    def _build_rank(self) -> None:
        self.word_cum = np.zeros(len(self.words) + 1, dtype=np.int64)
        np.cumsum(popcount(self.words), out=self.word_cum[1:])
        self.total_ones = int(self.word_cum[-1])

    def get(self, i: int) -> int:
        return int((self.words[i >> 6] >> np.uint64(i & 63)) & np.uint64(1))

    def rank1(self, i: int) -> int:
        """Number of set bits in [0, i)."""
        w = i >> 6
        count = int(self.word_cum[w])
        rem = i & 63
        if rem:
            mask = np.uint64((1 << rem) - 1)
            count += int(popcount(self.words[w] & mask))
        return count

    def rank0(self, i: int) -> int:
        return i - self.rank1(i)

    # -- bulk ------------------------------------------------------------

    def get_bulk(self, pos: np.ndarray) -> np.ndarray:
        pos = np.asarray(pos, dtype=np.int64)
        return ((self.words[pos >> 6] >> (pos & 63).astype(np.uint64)) & np.uint64(1)).astype(
            np.int64
        )

    def rank1_bulk(self, pos: np.ndarray) -> np.ndarray:
        pos = np.asarray(pos, dtype=np.int64)
        w = pos >> 6
        rem = (pos & 63).astype(np.uint64)
        partial = self.words[np.minimum(w, len(self.words) - 1)]
        mask = (np.uint64(1) << rem) - np.uint64(1)  # rem == 0 -> empty mask
        return self.word_cum[w] + popcount(partial & mask).astype(np.int64)

    def to_bits(self) -> np.ndarray:
        unpacked = np.unpackbits(self.words.view(np.uint8), bitorder="little")
        return unpacked[: self.n].astype(np.int64)
