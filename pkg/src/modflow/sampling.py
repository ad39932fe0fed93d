"""Deterministic samplers for property checks (shared by the CLI and tests)."""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from .core import GradedElement
from .cuntz import CuntzAlgebra
from .fermion import FermionAlgebra


def cuntz_words(n: int, max_len: int):
    """All ``(alpha, beta)`` with ``|alpha|, |beta| <= max_len``."""
    letters = range(1, n + 1)
    seqs = [w for L in range(max_len + 1) for w in itertools.product(letters, repeat=L)]
    for a in seqs:
        for b in seqs:
            yield tuple(a), tuple(b)


def random_cuntz_word(rng: np.random.Generator, n: int, max_len: int = 3, degree: int | None = None):
    while True:
        la = int(rng.integers(0, max_len + 1))
        lb = int(rng.integers(0, max_len + 1))
        if degree is not None:
            lb = la - degree
            if not 0 <= lb <= max_len:
                continue
        a = tuple(int(x) for x in rng.integers(1, n + 1, la))
        b = tuple(int(x) for x in rng.integers(1, n + 1, lb))
        return a, b


def random_cuntz_element(rng, algebra: CuntzAlgebra, terms: int = 3, max_len: int = 3) -> GradedElement:
    out = {}
    for _ in range(int(rng.integers(1, terms + 1))):
        w = random_cuntz_word(rng, algebra.n, max_len)
        out[w] = out.get(w, 0) + Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 5)))
    return algebra.combination(out)


def cuntz_monomial_triple(rng, algebra: CuntzAlgebra, max_len: int = 3):
    """Three words, the last chosen (when possible) to make the total degree zero."""
    w0 = random_cuntz_word(rng, algebra.n, max_len)
    w1 = random_cuntz_word(rng, algebra.n, max_len)
    d = (len(w0[0]) - len(w0[1])) + (len(w1[0]) - len(w1[1]))
    w2 = random_cuntz_word(rng, algebra.n, max_len, -d) if abs(d) <= max_len else \
        random_cuntz_word(rng, algebra.n, max_len)
    return tuple(algebra.word(*w) for w in (w0, w1, w2))


def random_fermion_monomial(rng, algebra: FermionAlgebra, max_len: int = 3) -> str:
    L = int(rng.integers(0, max_len + 1))
    js = rng.integers(1, algebra.modes + 1, L)
    stars = rng.integers(0, 2, L)
    return " ".join(f"a{j}{'*' if s else ''}" for j, s in zip(js, stars))


def random_fermion_element(rng, algebra: FermionAlgebra, terms: int = 3) -> GradedElement:
    out = algebra.zero()
    for _ in range(int(rng.integers(1, terms + 1))):
        c = complex(rng.normal(), rng.normal())
        out = out + algebra.parse(random_fermion_monomial(rng, algebra)).scaled(c)
    return out


def distinct_products(modes: int, max_n: int):
    """Words ``a_{j1} ... a_{jn}`` with distinct indices in every order, n = 1..max_n."""
    for n in range(1, max_n + 1):
        for js in itertools.permutations(range(1, modes + 1), n):
            yield " ".join(f"a{j}" for j in js)
