"""Truncated path signatures and the word/shuffle algebra.

Signatures of piecewise-linear paths are computed exactly: each segment's
signature has the closed form (increment tensor powers / k!) and segments
combine through truncated tensor multiplication (Chen's relation). Levels
are stored densely in lexicographic word order, which keeps the algebra
O(sum_k k d^k) per segment for the small (d, K) used here.
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Optional, Sequence, TextIO, Union

import numpy as np

from .errors import DomainError
from .fbm import MultiPath


@dataclass(frozen=True)
class Word:
    """A multi-index (i_1,...,i_k) over the alphabet {1,...,d}; may be empty."""

    letters: tuple[int, ...]
    d: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise DomainError("alphabet size d must be >= 1")
        letters = tuple(int(x) for x in self.letters)
        object.__setattr__(self, "letters", letters)
        for x in letters:
            if not 1 <= x <= self.d:
                raise DomainError(f"letter {x} outside alphabet 1..{self.d}")

    def __len__(self) -> int:
        return len(self.letters)

    def label(self) -> str:
        """Dot-joined letters; empty string for the order-0 word."""
        return ".".join(str(x) for x in self.letters)


WordLike = Union[Word, Sequence[int]]


def as_word(w: WordLike, d: Optional[int] = None) -> Word:
    """Coerce a letter sequence to a Word, inferring d from the letters if absent."""
    if isinstance(w, Word):
        if d is not None and w.d != d:
            raise DomainError(f"word alphabet {w.d} does not match d={d}")
        return w
    letters = tuple(int(x) for x in w)
    if d is None:
        d = max(letters) if letters else 1
    return Word(letters, d)


def word_index(w: Word) -> int:
    """Position of w within its level's lexicographic ordering."""
    idx = 0
    for letter in w.letters:
        idx = idx * w.d + (letter - 1)
    return idx


def all_words(d: int, k: int) -> Iterator[Word]:
    """All length-k words over {1..d} in lexicographic order."""
    for letters in itertools.product(range(1, d + 1), repeat=k):
        yield Word(letters, d)


def predictor_count(d: int, depth_k: int) -> int:
    """Number of signature components of orders 0..K: (d^(K+1)-1)/(d-1)."""
    if d < 1 or depth_k < 0:
        raise DomainError("require d >= 1 and depth_k >= 0")
    if d == 1:
        return depth_k + 1
    return (d ** (depth_k + 1) - 1) // (d - 1)


class TruncatedSignature:
    """All signature components of orders 0..K, stored level-by-level."""

    __slots__ = ("d", "depth", "levels")

    def __init__(self, d: int, depth: int, levels: Sequence[np.ndarray]):
        if d < 1 or depth < 0:
            raise DomainError("require d >= 1 and depth >= 0")
        if len(levels) != depth + 1:
            raise DomainError(f"expected {depth + 1} levels, got {len(levels)}")
        frozen = []
        for k, lev in enumerate(levels):
            arr = np.ascontiguousarray(lev, dtype=float).reshape(-1)
            if arr.size != d**k:
                raise DomainError(f"level {k} must have {d ** k} entries, got {arr.size}")
            arr.setflags(write=False)
            frozen.append(arr)
        if frozen[0][0] != 1.0:
            raise DomainError("level 0 of a signature is identically 1")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "levels", tuple(frozen))

    def __setattr__(self, name, value):  # pragma: no cover - guard only
        raise AttributeError("TruncatedSignature is immutable")

    @classmethod
    def identity(cls, d: int, depth: int) -> "TruncatedSignature":
        levels = [np.ones(1)] + [np.zeros(d**k) for k in range(1, depth + 1)]
        return cls(d, depth, levels)

    def level(self, k: int) -> np.ndarray:
        return self.levels[k]

    def component(self, w: WordLike) -> float:
        w = as_word(w, self.d)
        if len(w) > self.depth:
            raise DomainError(f"word length {len(w)} exceeds truncation depth {self.depth}")
        return float(self.levels[len(w)][word_index(w)])

    def flatten(self) -> np.ndarray:
        return np.concatenate(self.levels)

    @property
    def n_components(self) -> int:
        return predictor_count(self.d, self.depth)


def time_augment(p: MultiPath) -> MultiPath:
    """Prepend the time grid as an extra leading coordinate."""
    values = np.vstack([p.times[None, :], p.values])
    return MultiPath(p.times, values)


def segment_signature(increment: Sequence[float], depth_k: int) -> TruncatedSignature:
    """Exact signature of one linear segment: level k = increment^(x)k / k!."""
    if depth_k < 1:
        raise DomainError("depth_k must be >= 1")
    delta = np.ascontiguousarray(increment, dtype=float).reshape(-1)
    d = delta.size
    levels = [np.ones(1)]
    for k in range(1, depth_k + 1):
        levels.append(np.kron(levels[-1], delta) / k)
    return TruncatedSignature(d, depth_k, levels)


def chen_concat(a: TruncatedSignature, b: TruncatedSignature) -> TruncatedSignature:
    """Signature of the concatenated path: truncated tensor product of a and b."""
    if a.d != b.d or a.depth != b.depth:
        raise DomainError(
            f"signatures must share d and depth, got (d={a.d},K={a.depth}) "
            f"and (d={b.d},K={b.depth})"
        )
    d, depth = a.d, a.depth
    levels = [np.ones(1)]
    for k in range(1, depth + 1):
        acc = a.levels[k] + b.levels[k]
        for j in range(1, k):
            acc = acc + np.multiply.outer(a.levels[j], b.levels[k - j]).reshape(-1)
        levels.append(acc)
    return TruncatedSignature(d, depth, levels)


def _batch_levels(increments: np.ndarray, depth: int) -> list[np.ndarray]:
    """Fold segment signatures over a batch of paths.

    increments has shape (N, m, d); returns level arrays [(N,1), (N,d), ...].
    The fold is sequential in the segment index (Chen is ordered) and
    vectorized across the batch.
    """
    n_batch, m, d = increments.shape
    levels = [np.ones((n_batch, 1))]
    levels += [np.zeros((n_batch, d**k)) for k in range(1, depth + 1)]
    for s in range(m):
        delta = increments[:, s, :]
        seg = [np.ones((n_batch, 1)), delta]
        for k in range(2, depth + 1):
            seg.append((seg[-1][:, :, None] * delta[:, None, :]).reshape(n_batch, -1) / k)
        for k in range(depth, 0, -1):
            acc = levels[k] + seg[k]
            for j in range(1, k):
                acc = acc + (levels[j][:, :, None] * seg[k - j][:, None, :]).reshape(n_batch, -1)
            levels[k] = acc
    return levels


def batch_signatures(increments: np.ndarray, depth: int) -> np.ndarray:
    """Flattened truncated signatures for a batch of increment sequences.

    increments: (N, m, d) array of per-segment increments. Returns an
    (N, p_{d,K}) matrix whose columns follow level-then-lexicographic order.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 3:
        raise DomainError("increments must have shape (N, m, d)")
    return np.concatenate(_batch_levels(increments, depth), axis=1)


def path_signature(p: MultiPath, depth_k: int) -> TruncatedSignature:
    """Exact truncated signature of the piecewise-linear path through p's samples."""
    if depth_k < 1:
        raise DomainError("depth_k must be >= 1")
    if p.n < 2:
        raise DomainError("need at least 2 grid points")
    levels = _batch_levels(p.increments()[None, :, :], depth_k)
    return TruncatedSignature(p.d, depth_k, [lev[0] for lev in levels])


# --- shuffle algebra --------------------------------------------------------


@dataclass(frozen=True)
class WordMultiset:
    """Multiset of words with positive integer multiplicities."""

    entries: tuple[tuple[Word, int], ...]

    def __post_init__(self) -> None:
        for _, mult in self.entries:
            if mult < 1:
                raise DomainError("multiplicities must be positive")

    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.entries)

    def as_dict(self) -> dict[Word, int]:
        return dict(self.entries)


@lru_cache(maxsize=None)
def _shuffle_letters(a: tuple[int, ...], b: tuple[int, ...]) -> dict:
    if not a:
        return {b: 1}
    if not b:
        return {a: 1}
    out: dict[tuple[int, ...], int] = {}
    for prefix, mult in _shuffle_letters(a[:-1], b).items():
        key = prefix + (a[-1],)
        out[key] = out.get(key, 0) + mult
    for prefix, mult in _shuffle_letters(a, b[:-1]).items():
        key = prefix + (b[-1],)
        out[key] = out.get(key, 0) + mult
    return out


def shuffle(i: WordLike, j: WordLike) -> WordMultiset:
    """All order-preserving interleavings of i and j, with multiplicities."""
    wi = as_word(i)
    wj = as_word(j)
    if isinstance(i, Word) and isinstance(j, Word) and wi.d != wj.d:
        raise DomainError("shuffle requires a common alphabet size")
    d = max(wi.d, wj.d)
    combos = _shuffle_letters(wi.letters, wj.letters)
    entries = tuple(
        (Word(letters, d), mult) for letters, mult in sorted(combos.items())
    )
    return WordMultiset(entries)


def shuffle_check(sig: TruncatedSignature, i: WordLike, j: WordLike) -> float:
    """Absolute residual |S_i S_j - sum over shuffles of S_K| on sig."""
    wi = as_word(i, sig.d)
    wj = as_word(j, sig.d)
    if len(wi) + len(wj) > sig.depth:
        raise DomainError(
            f"|i|+|j| = {len(wi) + len(wj)} exceeds truncation depth {sig.depth}"
        )
    product = sig.component(wi) * sig.component(wj)
    total = 0.0
    for word, mult in shuffle(wi, wj).entries:
        total += mult * sig.component(Word(word.letters, sig.d))
    return abs(product - total)


# --- serialization ----------------------------------------------------------


def signature_to_csv(sig: TruncatedSignature, out: TextIO) -> None:
    """Write `word,value` rows; word is dot-joined letters (empty for order 0)."""
    out.write("word,value\n")
    for k in range(sig.depth + 1):
        for w in all_words(sig.d, k):
            out.write(f"{w.label()},{format(sig.component(w), '.17g')}\n")


def signature_to_csv_string(sig: TruncatedSignature) -> str:
    buf = io.StringIO()
    signature_to_csv(sig, buf)
    return buf.getvalue()
