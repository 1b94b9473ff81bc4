"""Balanced binary wavelet tree over the token-id bit width.

The tree is stored level by level: the level-l bitvector holds bit
(bits-1-l) of every element, with elements arranged so that each tree
node occupies a contiguous span (a node's children are its stable
zero/one partition, left child first). Rank, access and range-distinct
queries all walk the `bits` levels, giving the log-alphabet factor.
"""

from __future__ import annotations

import numpy as np

from gramseek.bitvector import BitVector


class WaveletTree:
    def __init__(self, seq: np.ndarray, bits: int):
        seq = np.asarray(seq, dtype=np.int64)
        if len(seq) == 0:
            raise ValueError("cannot build a wavelet tree over an empty sequence")
        if bits < 1 or (len(seq) and int(seq.max()) >> bits):
            raise ValueError(f"alphabet exceeds the {bits}-bit wavelet-tree bound")
        self.n = len(seq)
        self.bits = bits
        self.levels: list[BitVector] = []
        order = np.arange(self.n)
        for level in range(bits):
            vals = seq[order]
            self.levels.append(BitVector((vals >> (bits - 1 - level)) & 1))
            if level < bits - 1:
                # Stable sort by the top (level+1) bits keeps every node's
                # elements contiguous and in original relative order.
                order = order[np.argsort(vals >> (bits - 1 - level), kind="stable")]

    @classmethod
    def from_level_words(cls, level_words: list[np.ndarray], n: int, bits: int) -> "WaveletTree":
        wt = cls.__new__(cls)
        wt.n = n
        wt.bits = bits
        wt.levels = [BitVector.from_words(w, n) for w in level_words]
        return wt

    def rank(self, symbol: int, pos: int) -> int:
        """Occurrences of symbol in [0, pos)."""
        return self.rank_pair(symbol, pos, pos)[0]

    def rank_pair(self, symbol: int, lo: int, hi: int) -> tuple[int, int]:
        """(rank(symbol, lo), rank(symbol, hi)) sharing one tree walk."""
        s, e, p_lo, p_hi = 0, self.n, lo, hi
        for level in range(self.bits):
            bv = self.levels[level]
            r_s = bv.rank1(s)
            ones_node = bv.rank1(e) - r_s
            zeros_node = (e - s) - ones_node
            ones_lo = bv.rank1(s + p_lo) - r_s
            ones_hi = bv.rank1(s + p_hi) - r_s
            if (symbol >> (self.bits - 1 - level)) & 1:
                p_lo, p_hi = ones_lo, ones_hi
                s = s + zeros_node
            else:
                p_lo, p_hi = p_lo - ones_lo, p_hi - ones_hi
                e = s + zeros_node
        return p_lo, p_hi

    def access_and_rank(self, pos: int) -> tuple[int, int]:
        """(symbol at pos, occurrences of that symbol in [0, pos))."""
        s, e, p = 0, self.n, pos
        symbol = 0
        for level in range(self.bits):
            bv = self.levels[level]
            r_s = bv.rank1(s)
            ones_node = bv.rank1(e) - r_s
            zeros_node = (e - s) - ones_node
            ones_before = bv.rank1(s + p) - r_s
            if bv.get(s + p):
                symbol = (symbol << 1) | 1
                p = ones_before
                s = s + zeros_node
            else:
                symbol = symbol << 1
                p = p - ones_before
                e = s + zeros_node
        return symbol, p

    def access_and_rank_bulk(self, pos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized access_and_rank over an array of positions."""
        pos = np.asarray(pos, dtype=np.int64)
        m = len(pos)
        s = np.zeros(m, dtype=np.int64)
        e = np.full(m, self.n, dtype=np.int64)
        p = pos.copy()
        symbol = np.zeros(m, dtype=np.int64)
        for level in range(self.bits):
            bv = self.levels[level]
            # One fused rank call per level keeps numpy overhead flat.
            r = bv.rank1_bulk(np.concatenate([s, e, s + p]))
            r_s, r_e, r_p = r[:m], r[m: 2 * m], r[2 * m:]
            ones_node = r_e - r_s
            zeros_node = (e - s) - ones_node
            ones_before = r_p - r_s
            b = bv.get_bulk(s + p)
            symbol = (symbol << 1) | b
            one = b == 1
            left_end = s + zeros_node
            p = np.where(one, ones_before, p - ones_before)
            s = np.where(one, left_end, s)
            e = np.where(one, e, left_end)
        return symbol, p

    def range_distinct(self, lo: int, hi: int) -> dict[int, int]:
        """Map symbol -> count over positions [lo, hi); counts sum to hi - lo."""
        if hi <= lo:
            return {}
        # Frontier of live tree nodes, advanced one level at a time with
        # bulk rank so wide ranges stay cheap.
        s = np.array([0], dtype=np.int64)
        e = np.array([self.n], dtype=np.int64)
        p_lo = np.array([lo], dtype=np.int64)
        p_hi = np.array([hi], dtype=np.int64)
        prefix = np.array([0], dtype=np.int64)
        for level in range(self.bits):
            bv = self.levels[level]
            m = len(s)
            r = bv.rank1_bulk(np.concatenate([s, e, s + p_lo, s + p_hi]))
            r_s = r[:m]
            ones_node = r[m: 2 * m] - r_s
            zeros_node = (e - s) - ones_node
            ones_lo = r[2 * m: 3 * m] - r_s
            ones_hi = r[3 * m:] - r_s
            zeros_lo = p_lo - ones_lo
            zeros_hi = p_hi - ones_hi
            left_end = s + zeros_node
            s = np.concatenate([s, left_end])
            e = np.concatenate([left_end, e])
            p_lo = np.concatenate([zeros_lo, ones_lo])
            p_hi = np.concatenate([zeros_hi, ones_hi])
            prefix = np.concatenate([prefix << 1, (prefix << 1) | 1])
            live = p_hi > p_lo
            s, e, p_lo, p_hi, prefix = s[live], e[live], p_lo[live], p_hi[live], prefix[live]
            if not len(s):
                return {}
        return {int(sym): int(cnt) for sym, cnt in zip(prefix, p_hi - p_lo)}

    def decode_all(self) -> np.ndarray:
        """Rebuild the full symbol sequence (the inverse of construction)."""
        key = np.zeros(self.n, dtype=np.int64)
        perm = np.arange(self.n)
        for level in range(self.bits):
            level_bits = self.levels[level].to_bits()
            b_orig = np.empty(self.n, dtype=np.int64)
            b_orig[perm] = level_bits
            key = (key << 1) | b_orig
            if level < self.bits - 1:
                perm = np.argsort(key, kind="stable")
        return key

    def level_words(self) -> list[np.ndarray]:
        return [bv.words for bv in self.levels]
