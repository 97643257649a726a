from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .errors import CapacityError, ValidationError
from .matrix_core import spectral_norm
from .models import MatrixSet

logger = logging.getLogger(__name__)

DEFAULT_ENUMERATION_BUDGET = 2**20
# Largest number of floats held by one batch of completed products.
_BATCH_FLOATS = 2**18


@dataclass(frozen=True)
class ProductWord:
    """
    A word sigma = (sigma_1, ..., sigma_k) over {1, ..., m}; its product is
    A_sigma = A_{sigma_k} ... A_{sigma_1}.
    """
    letters: tuple[int, ...]

    def rotations(self) -> list["ProductWord"]:
        k = len(self.letters)
        return [ProductWord(self.letters[i:] + self.letters[:i]) for i in range(k)]

    def canonical(self) -> "ProductWord":
        return min(self.rotations(), key=lambda w: w.letters)

    def product(self, matrix_set: MatrixSet) -> np.ndarray:
        P = np.eye(matrix_set.n)
        for letter in self.letters:
            P = matrix_set.matrices[letter - 1] @ P
        return P

    def __str__(self) -> str:
        return "".join(str(x) for x in self.letters) if max(self.letters) < 10 else ",".join(map(str, self.letters))


def _necklaces(m: int, k: int) -> Iterator[tuple[int, ...]]:
    # Fredricksen-Kessler-Maiorana: lexicographically minimal rotations, in lexicographic order.
    a = [0] * (k + 1)

    def gen(t: int, p: int) -> Iterator[tuple[int, ...]]:
        if t > k:
            if k % p == 0:
                yield tuple(a[1:])
            return
        a[t] = a[t - p]
        yield from gen(t + 1, p)
        for j in range(a[t - p] + 1, m):
            a[t] = j
            yield from gen(t + 1, t)

    return gen(1, 1)


def _check_budget(m: int, k: int, budget: int) -> None:
    if m < 1 or k < 1:
        raise ValidationError(f"Word enumeration needs m >= 1 and k >= 1, got m={m}, k={k}.")
    if m**k > budget:
        raise CapacityError(f"{m}^{k} = {m**k} words exceed the enumeration budget {budget}.")


def enumerate_words(
    m: int,
    k: int,
    dedup_cyclic: bool = False,
    *,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> Iterator[ProductWord]:
    """
    All m^k words in lexicographic order, or one representative (the minimal
    rotation) per cyclic class when dedup_cyclic is set.
    """
    _check_budget(m, k, budget)
    if dedup_cyclic:
        source = _necklaces(m, k)
    else:
        source = itertools.product(range(m), repeat=k)
    for word in source:
        yield ProductWord(tuple(x + 1 for x in word))


def _word_from_code(code: int, m: int, k: int) -> ProductWord:
    letters = []
    for _ in range(k):
        code, digit = divmod(code, m)
        letters.append(digit + 1)
    return ProductWord(tuple(reversed(letters)))


@dataclass(frozen=True)
class OracleBounds:
    lower: float
    upper: float
    k: int
    lower_word: Optional[ProductWord] = None
    upper_word: Optional[ProductWord] = None
    words: int = 0
    radius_evaluations: int = 0

    def __iter__(self):
        yield self.lower
        yield self.upper


def _tail_products(mats: np.ndarray, r: int) -> np.ndarray:
    # tails[w] for the r-letter word with code w (first letter most significant).
    tails = mats
    for _ in range(r - 1):
        tails = np.einsum("iab,wbc->wiac", mats, tails).reshape(-1, *mats.shape[1:])
    return tails


def brute_force_bounds(
    matrix_set: MatrixSet,
    k: int,
    *,
    dedup: bool = True,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> OracleBounds:
    """
    max rho(A_sigma)^(1/k) <= rho(A_1, ..., A_m) <= max ||A_sigma||^(1/k) over words of length k.

    Spectral radii are taken over cyclic representatives only (rotations of a
    product share their spectrum); norms are taken over every word.
    """
    m, n = matrix_set.m, matrix_set.n
    _check_budget(m, k, budget)

    scale = max(spectral_norm(a) for a in matrix_set.matrices)
    if scale == 0.0:
        return OracleBounds(lower=0.0, upper=0.0, k=k, words=m**k)
    mats = np.stack([a / scale for a in matrix_set.matrices])

    r = 1
    while r < k and m ** (r + 1) * n * n <= _BATCH_FLOATS:
        r += 1
    tails = _tail_products(mats, r)
    block = m**r

    representative: Optional[np.ndarray] = None
    if dedup:
        representative = np.zeros(m**k, dtype=bool)
        for word in _necklaces(m, k):
            code = 0
            for x in word:
                code = code * m + x
            representative[code] = True

    best_norm, best_norm_code = -1.0, 0
    best_rho, best_rho_code = -1.0, 0
    radius_evaluations = 0

    def walk(P: np.ndarray, depth: int, code: int) -> Iterator[tuple[int, np.ndarray]]:
        if depth == k - r:
            yield code, P
            return
        for i in range(m):
            yield from walk(mats[i] @ P, depth + 1, code * m + i)

    for prefix_code, P in walk(np.eye(n), 0, 0):
        batch = tails @ P
        base = prefix_code * block

        norms = np.linalg.norm(batch, ord=2, axis=(1, 2))
        j = int(np.argmax(norms))
        if norms[j] > best_norm:
            best_norm, best_norm_code = float(norms[j]), base + j

        if representative is not None:
            idx = np.flatnonzero(representative[base:base + block])
        else:
            idx = np.arange(block)
        if idx.size:
            radii = np.max(np.abs(np.linalg.eigvals(batch[idx])), axis=1)
            radius_evaluations += idx.size
            j = int(np.argmax(radii))
            if radii[j] > best_rho:
                best_rho, best_rho_code = float(radii[j]), base + int(idx[j])

    upper = scale * best_norm ** (1.0 / k)
    lower = min(scale * best_rho ** (1.0 / k), upper)
    logger.debug(f"Brute force k={k}: {m**k} words, {radius_evaluations} spectral radii, [{lower!r}, {upper!r}]")
    return OracleBounds(
        lower=lower,
        upper=upper,
        k=k,
        lower_word=_word_from_code(best_rho_code, m, k),
        upper_word=_word_from_code(best_norm_code, m, k),
        words=m**k,
        radius_evaluations=radius_evaluations,
    )
