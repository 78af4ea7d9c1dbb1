"""Canonical prefix codes and big-endian bit packing."""

import heapq
import itertools
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import MalformedBitstream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CanonicalCode:
    """Canonical Huffman code described only by per-symbol code lengths."""
    lengths: Dict[int, int]

    @classmethod
    def from_symbols(cls, symbols: Sequence[int]) -> "CanonicalCode":
        """Optimal code lengths for the empirical symbol frequencies."""
        counts = Counter(int(s) for s in symbols)
        if not counts:
            return cls({})
        if len(counts) == 1:
            return cls({next(iter(counts)): 1})
        tie = itertools.count()
        heap = [(n, next(tie), [s]) for s, n in sorted(counts.items())]
        heapq.heapify(heap)
        lengths = {s: 0 for s in counts}
        while len(heap) > 1:
            n1, _, group1 = heapq.heappop(heap)
            n2, _, group2 = heapq.heappop(heap)
            for s in group1 + group2:
                lengths[s] += 1
            heapq.heappush(heap, (n1 + n2, next(tie), group1 + group2))
        return cls(lengths)

    def ordered(self) -> List[Tuple[int, int]]:
        """(length, symbol) pairs in canonical order."""
        return sorted((n, s) for s, n in self.lengths.items())

    def codewords(self) -> Dict[int, Tuple[int, int]]:
        """Symbol to (code value, length)."""
        table = {}
        code, prev_len = 0, 0
        for length, symbol in self.ordered():
            code <<= length - prev_len
            table[symbol] = (code, length)
            code += 1
            prev_len = length
        return table

    def mean_length(self, symbols: Sequence[int]) -> float:
        if len(symbols) == 0:
            return 0.0
        return float(np.mean([self.lengths[int(s)] for s in symbols]))


def empirical_entropy(symbols: Sequence[int]) -> float:
    """Entropy of the symbol histogram, bits per symbol."""
    counts = np.array(list(Counter(int(s) for s in symbols).values()), dtype=float)
    if counts.size == 0:
        return 0.0
    p = counts / counts.sum()
    return float(-np.sum(p * np.log2(p)))


class BitWriter:
    """Accumulates bits most-significant first."""

    def __init__(self):
        self._chunks: List[np.ndarray] = []
        self.n_bits = 0

    def write_fixed(self, values: np.ndarray, width: int) -> None:
        """Write every value as an unsigned ``width``-bit field."""
        values = np.asarray(values, dtype=np.uint64)
        shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
        bits = ((values[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8).ravel()
        self._chunks.append(bits)
        self.n_bits += bits.size

    def write_codes(self, symbols: Sequence[int], code: CanonicalCode) -> None:
        """Write symbols with a prefix code."""
        patterns = {}
        for s, (value, length) in code.codewords().items():
            patterns[s] = np.array([(value >> (length - 1 - k)) & 1 for k in range(length)],
                                   dtype=np.uint8)
        try:
            pieces = [patterns[int(s)] for s in symbols]
        except KeyError as exc:
            raise MalformedBitstream(f"symbol {exc.args[0]} has no codeword") from exc
        if pieces:
            bits = np.concatenate(pieces)
            self._chunks.append(bits)
            self.n_bits += bits.size

    def to_bytes(self) -> bytes:
        if not self._chunks:
            return b""
        return np.packbits(np.concatenate(self._chunks)).tobytes()


class BitReader:
    """Reads bits most-significant first from a byte string."""

    def __init__(self, data: bytes, n_bits: int):
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        if n_bits > bits.size:
            raise MalformedBitstream(f"payload holds {bits.size} bits, header claims {n_bits}")
        self._bits = bits[:n_bits]
        self.pos = 0

    @property
    def remaining(self) -> int:
        return self._bits.size - self.pos

    def read_fixed(self, count: int, width: int) -> np.ndarray:
        """Read ``count`` unsigned ``width``-bit fields."""
        need = count * width
        if need > self.remaining:
            raise MalformedBitstream(f"payload truncated: need {need} bits, have {self.remaining}")
        block = self._bits[self.pos:self.pos + need].reshape(count, width).astype(np.int64)
        self.pos += need
        weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
        return block @ weights

    def read_codes(self, count: int, code: CanonicalCode) -> np.ndarray:
        """Decode ``count`` symbols of a canonical prefix code."""
        ordered = code.ordered()
        if not ordered:
            if count:
                raise MalformedBitstream("empty code table for a non-empty payload")
            return np.zeros(0, dtype=np.int64)
        max_len = ordered[-1][0]
        first_code = [0] * (max_len + 2)
        first_index = [0] * (max_len + 2)
        count_len = [0] * (max_len + 2)
        for length, _ in ordered:
            count_len[length] += 1
        symbols = [s for _, s in ordered]
        code_value, index = 0, 0
        for length in range(1, max_len + 1):
            code_value = (code_value + count_len[length - 1]) << 1 if length > 1 else 0
            first_code[length] = code_value
            first_index[length] = index
            index += count_len[length]

        bits = self._bits
        pos, end = self.pos, self._bits.size
        out = np.empty(count, dtype=np.int64)
        for k in range(count):
            value, length = 0, 0
            while True:
                if pos >= end or length >= max_len:
                    raise MalformedBitstream(f"invalid or truncated codeword at symbol {k}")
                value = (value << 1) | int(bits[pos])
                pos += 1
                length += 1
                offset = value - first_code[length]
                if 0 <= offset < count_len[length]:
                    out[k] = symbols[first_index[length] + offset]
                    break
        self.pos = pos
        return out
