"""Symbolic Cuntz algebra O_n with its gauge action and KMS_{ln n} state.

Elements are linear combinations of canonical words ``S_alpha S_beta*``
with exact rational coefficients.  Canonical words are not linearly
independent (``sum_i S_i S_i* = 1``), so zero tests expand every word of a
given degree to a common ``|beta|`` first; at fixed lengths the words are
matrix units and the test is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .core import AlgebraModel, GradedElement, KmsContext
from .errors import InputError, WordParseError
from .tracetable import SpectralTraceTable

MAX_N = 16
MAX_WORD_LEN = 32
#: expansion guard for exact zero tests
MAX_EXPANSION = 200_000

Word = tuple  # (alpha, beta), each a tuple of ints in 1..n


def word_multiply(u: Word, w: Word) -> Word | None:
    """``(S_a S_b*)(S_c S_d*)`` reduced with ``S_i* S_j = delta_ij``; None for zero."""
    a, b = u
    c, d = w
    if c[:len(b)] == b:
        return a + c[len(b):], d
    if b[:len(c)] == c:
        return a, d + b[len(c):]
    return None


def word_degree(w: Word) -> int:
    return len(w[0]) - len(w[1])


def _coerce(c):
    if isinstance(c, (int, Fraction)):
        return Fraction(c)
    if isinstance(c, complex) and c.imag == 0:
        c = c.real
    if isinstance(c, float) and c.is_integer():
        return Fraction(int(c))
    return c


@dataclass(frozen=True, eq=False)
class CuntzAlgebra(AlgebraModel):
    n: int

    exact = True

    def __post_init__(self):
        if not 2 <= self.n <= MAX_N:
            raise InputError(f"Cuntz algebra needs 2 <= n <= {MAX_N}, got {self.n}")

    def __eq__(self, other):
        return isinstance(other, CuntzAlgebra) and other.n == self.n

    def __hash__(self):
        return hash(("cuntz", self.n))

    @property
    def model_id(self) -> str:
        return f"O_{self.n}"

    @property
    def beta(self) -> float:
        return math.log(self.n)

    def kms_context(self) -> KmsContext:
        return KmsContext(self.beta, True, None, Fraction(self.n), self.model_id)

    # construction -----------------------------------------------------
    def _check_word(self, alpha, beta) -> Word:
        alpha, beta = tuple(int(i) for i in alpha), tuple(int(i) for i in beta)
        for i in alpha + beta:
            if not 1 <= i <= self.n:
                raise InputError(f"letter {i} outside 1..{self.n}")
        if len(alpha) > MAX_WORD_LEN or len(beta) > MAX_WORD_LEN:
            raise InputError(f"word longer than {MAX_WORD_LEN}")
        return alpha, beta

    def word(self, alpha=(), beta=(), coeff=1) -> GradedElement:
        """The element ``coeff * S_alpha S_beta*``."""
        w = self._check_word(alpha, beta)
        label = format_word(w)
        return self.element({word_degree(w): {w: _coerce(coeff)}}, origin=label)

    def S(self, i: int) -> GradedElement:
        return self.word((i,), ())

    def combination(self, terms: Mapping[Word, object]) -> GradedElement:
        comps: dict[int, dict] = {}
        for w, c in terms.items():
            w = self._check_word(*w)
            comps.setdefault(word_degree(w), {})[w] = _coerce(c)
        return self.element(comps)

    def parse(self, text: str) -> GradedElement:
        alpha, beta = parse_word(text)
        el = self.word(alpha, beta)
        return GradedElement(el.model, el.components, text)

    # payload hooks ------------------------------------------------------
    def p_zero(self):
        return {}

    def p_unit(self):
        return {((), ()): Fraction(1)}

    def p_add(self, x, y):
        out = dict(x)
        for w, c in y.items():
            out[w] = out.get(w, 0) + c
        return {w: c for w, c in out.items() if c != 0}

    def p_scale(self, x, c):
        c = _coerce(c)
        return {w: c * d for w, d in x.items() if c * d != 0}

    def p_mul(self, x, y):
        out: dict = {}
        for u, c in x.items():
            for w, d in y.items():
                z = word_multiply(u, w)
                if z is None:
                    continue
                if len(z[0]) > MAX_WORD_LEN or len(z[1]) > MAX_WORD_LEN:
                    raise InputError(f"product word longer than {MAX_WORD_LEN}")
                out[z] = out.get(z, 0) + c * d
        return {w: c for w, c in out.items() if c != 0}

    def p_adjoint(self, x):
        return {(b, a): (c.conjugate() if isinstance(c, complex) else c) for (a, b), c in x.items()}

    def normal_form(self, x) -> dict:
        """Expand to a common ``|beta|`` so that distinct keys are independent."""
        if not x:
            return {}
        L = max(len(b) for _, b in x)
        size = sum(self.n ** (L - len(b)) for _, b in x)
        if size > MAX_EXPANSION:
            raise InputError("element too large for an exact zero test")
        out: dict = {}
        for (a, b), c in x.items():
            pad = [()]
            for _ in range(L - len(b)):
                pad = [p + (i,) for p in pad for i in range(1, self.n + 1)]
            for p in pad:
                key = (a + p, b + p)
                out[key] = out.get(key, 0) + c
        return {w: c for w, c in out.items() if c != 0}

    def p_norm(self, x) -> float:
        return float(sum(abs(c) for c in self.normal_form(x).values()))

    def p_is_zero(self, x, tol=None) -> bool:
        nf = self.normal_form(x)
        if all(isinstance(c, Fraction) for c in nf.values()):
            return not nf
        return sum(abs(c) for c in nf.values()) <= (self.prune_tol if tol is None else tol)

    def p_is_negligible(self, x) -> bool:
        return not x

    def p_tau(self, x):
        return cuntz_phi_payload(x, self.n)

    def p_trace_table(self, x, ctx):
        tau = self.p_tau(x)
        positive = isinstance(tau, Fraction) and tau >= 0
        return SpectralTraceTable.full(self.beta, tau, Fraction(self.n), positive)


def cuntz_phi_payload(x: Mapping[Word, object], n: int):
    total = Fraction(0)
    for (a, b), c in x.items():
        if a == b:
            total += c * Fraction(1, n ** len(a))
    return total


def cuntz_phi(x: GradedElement):
    """``phi(S_a S_b*) = delta_ab n^{-|a|}``, extended linearly (exact)."""
    if not isinstance(x.model, CuntzAlgebra):
        raise InputError("cuntz_phi needs a Cuntz element")
    return cuntz_phi_payload(x.components.get(0, {}), x.model.n)


def spectral_trace_cuntz(f: GradedElement, m: int):
    """``Tr_phi(f Phi_m) = n^m tau(f)`` (full spectral subspaces), exact."""
    if not isinstance(f.model, CuntzAlgebra):
        raise InputError("spectral_trace_cuntz needs a Cuntz element")
    if any(k != 0 for k in f.degrees):
        raise InputError(f"spectral_trace_cuntz needs degree 0, got {list(f.degrees)}")
    return Fraction(f.model.n) ** m * cuntz_phi(f)


def closed_form_cuntz(alpha, beta, n: int) -> Fraction:
    """Spectral flow of ``S_alpha S_beta*``: ``(|beta| - |alpha|) / n^{|alpha|}``."""
    return Fraction(len(beta) - len(alpha), n ** len(alpha))


def format_word(w: Word) -> str:
    a, b = w
    parts = []
    if a:
        parts.append("S[" + ",".join(map(str, a)) + "]")
    if b:
        parts.append("S*[" + ",".join(map(str, b)) + "]")
    return ".".join(parts) if parts else "S[]"


# ---------------------------------------------------------------------------
# Word literals:  S[1,2].S*[1]   S[1]   S*[2]   S[]
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str):
        offset = len(self.text[:self.pos].encode())
        raise WordParseError(msg, self.text, offset)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, s: str) -> bool:
        self.skip()
        return self.text.startswith(s, self.pos)

    def expect(self, s: str):
        if not self.peek(s):
            self.error(f"expected {s!r}")
        self.pos += len(s)

    def number(self) -> int:
        self.skip()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            self.error("expected a letter index")
        return int(self.text[start:self.pos])

    def letters(self) -> tuple:
        self.expect("[")
        out = []
        if self.peek("]"):
            self.pos += 1
            return ()
        out.append(self.number())
        while self.peek(","):
            self.pos += 1
            out.append(self.number())
        self.expect("]")
        return tuple(out)

    def word(self) -> Word:
        alpha = beta = ()
        if self.peek("S*"):
            self.pos += 2
            beta = self.letters()
        elif self.peek("S"):
            self.pos += 1
            alpha = self.letters()
            if self.peek("."):
                self.pos += 1
                self.expect("S*")
                beta = self.letters()
        else:
            self.error("expected 'S[' or 'S*['")
        self.skip()
        if self.pos != len(self.text):
            self.error("unexpected trailing input")
        return alpha, beta


def parse_word(text: str) -> Word:
    """Parse ``S[a,..].S*[b,..]`` (either half optional) into ``(alpha, beta)``."""
    return _Parser(text).word()
