"""Reduced words in the free group F_k.

Letters are nonzero integers: ``i`` is the generator g_i and ``-i`` its
inverse.  A word is a tuple of letters.  For display, g_1, g_2, ... are
written a, b, ... and their inverses A, B, ...
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

Word = tuple

_ALPHA = "abcdefghijklmnopqrstuvwxyz"


def parse(s: str) -> Word:
    """'aB' -> (1, -2)."""
    out = []
    for ch in s.strip():
        i = _ALPHA.find(ch.lower())
        if i < 0:
            raise ValueError(f"unknown letter {ch!r}")
        out.append(-(i + 1) if ch.isupper() else i + 1)
    return reduce(out)


def fmt(w: Sequence[int]) -> str:
    if len(w) == 0:
        return "1"
    return "".join(_ALPHA[a - 1] if a > 0 else _ALPHA[-a - 1].upper() for a in w)


def letters(k: int) -> list:
    """g_1, g_1^-1, g_2, g_2^-1, ... in enumeration order."""
    out = []
    for i in range(1, k + 1):
        out += [i, -i]
    return out


def reduce(w, k: int | None = None) -> Word:
    stack = []
    for a in w:
        a = int(a)
        if a == 0 or (k is not None and abs(a) > k):
            raise ValueError(f"unknown letter {a}")
        if stack and stack[-1] == -a:
            stack.pop()
        else:
            stack.append(a)
    return tuple(stack)


def inverse(w: Word) -> Word:
    return tuple(-a for a in reversed(w))


def multiply(w1: Word, w2: Word) -> Word:
    # both inputs reduced: only the junction can cancel
    i = 0
    n = min(len(w1), len(w2))
    while i < n and w1[len(w1) - 1 - i] == -w2[i]:
        i += 1
    return tuple(w1[: len(w1) - i]) + tuple(w2[i:])


def is_reduced(w) -> bool:
    return all(w[i] != -w[i + 1] for i in range(len(w) - 1))


def is_cyclically_reduced(w) -> bool:
    return is_reduced(w) and (len(w) < 2 or w[0] != -w[-1])


def sphere_size(k: int, L: int) -> int:
    return 1 if L == 0 else 2 * k * (2 * k - 1) ** (L - 1)


def sphere(k: int, L: int) -> Iterator[Word]:
    """All reduced words of length L, lazily, in lexicographic letter order."""
    if L < 0:
        raise ValueError("L must be >= 0")
    if L == 0:
        yield ()
        return
    alph = letters(k)
    w = [0] * L
    # iterative depth-first walk, keeps memory O(L)
    choice = [0] * L
    depth = 0
    while depth >= 0:
        if choice[depth] == len(alph):
            choice[depth] = 0
            depth -= 1
            if depth >= 0:
                choice[depth] += 1
            continue
        a = alph[choice[depth]]
        if depth > 0 and a == -w[depth - 1]:
            choice[depth] += 1
            continue
        w[depth] = a
        if depth == L - 1:
            yield tuple(w)
            choice[depth] += 1
        else:
            depth += 1
    return


def ball(k: int, L: int) -> Iterator[Word]:
    for n in range(L + 1):
        yield from sphere(k, n)


def sphere_array(k: int, L: int) -> np.ndarray:
    """The sphere of radius L as an (N, L) int8 array, same order as ``sphere``."""
    if L == 0:
        return np.zeros((1, 0), dtype=np.int8)
    alph = np.array(letters(k), dtype=np.int8)
    W = alph[:, None]
    for _ in range(L - 1):
        # every row is followed by every letter, which keeps lexicographic order
        n = W.shape[0]
        rows = np.repeat(np.arange(n), len(alph))
        cols = np.tile(alph, n)
        ok = W[rows, -1] != -cols
        W = np.hstack([W[rows[ok]], cols[ok, None]])
    return W


# ------------------------------------------------------------ cyclic words


def rotations(w: Word):
    return [w[i:] + w[:i] for i in range(len(w))]


def canonical_rotation(w: Word) -> Word:
    return min(rotations(tuple(w))) if w else ()


def cyclic_reduce(w: Word) -> Word:
    w = reduce(w)
    i, j = 0, len(w) - 1
    while i < j and w[i] == -w[j]:
        i += 1
        j -= 1
    return w[i: j + 1]


def _prime_factors(n: int):
    out, f = [], 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


def is_primitive(w: Word) -> bool:
    """False iff w is a proper power of a shorter word."""
    n = len(w)
    for m in _prime_factors(n):
        s = n // m
        if w == w[:s] * m:
            return False
    return n > 0


@dataclass(frozen=True)
class CyclicWord:
    letters: Word
    primitive: bool

    @classmethod
    def of(cls, w) -> "CyclicWord":
        c = cyclic_reduce(tuple(w))
        if not c:
            raise ValueError("trivial conjugacy class")
        c = canonical_rotation(c)
        return cls(c, is_primitive(c))

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        return fmt(self.letters)


def conjugacy_classes(k: int, L: int) -> Iterator[CyclicWord]:
    """One canonical cyclic word per nontrivial class of cyclic length <= L.

    A class and its inverse class are kept apart.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    for n in range(1, L + 1):
        for w in sphere(k, n):
            if w[0] == -w[-1] and n > 1:
                continue
            if w == canonical_rotation(w):
                yield CyclicWord(w, is_primitive(w))


def fixed_point_symbol(w, prefixDepth: int) -> Word:
    """First ``prefixDepth`` letters of w w w ..."""
    c = w.letters if isinstance(w, CyclicWord) else tuple(w)
    if not c:
        raise ValueError("empty word")
    reps = prefixDepth // len(c) + 1
    return (c * reps)[:prefixDepth]


# ------------------------------------------------------------ sampling


def random_word(rng: np.random.Generator, k: int, minLen: int, maxLen: int) -> Word:
    """Uniform length in [minLen, maxLen], then a uniform reduced word of that length."""
    L = int(rng.integers(minLen, maxLen + 1))
    alph = letters(k)
    w: list = []
    while len(w) < L:
        a = alph[int(rng.integers(len(alph)))]
        if w and w[-1] == -a:
            continue
        w.append(a)
    return tuple(w)


def random_cyclic_word(rng: np.random.Generator, k: int, minLen: int, maxLen: int,
                       primitive: bool = True) -> Word:
    while True:
        w = random_word(rng, k, max(1, minLen), maxLen)
        if is_cyclically_reduced(w) and (not primitive or is_primitive(w)):
            return w
