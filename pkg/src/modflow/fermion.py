"""Fermion (CAR) algebra on m modes as dense 2^m x 2^m matrices.

Mode 1 is the most significant tensor factor and a basis index ``b`` has
mode j occupied when bit ``m - j`` of ``b`` is set.  With
``a_j = s3 x ... x s3 x [[0,0],[1,0]] x 1 x ... x 1`` the entry ``(b, b')`` of
any matrix has gauge degree ``|b| - |b'|`` (difference of occupation
numbers), so homogeneous components are read off by masking.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np

from .core import AlgebraModel, GradedElement, KmsContext
from .errors import InputError, WordParseError
from .tracetable import SpectralTraceTable

MAX_MODES = 10

_S3 = np.diag([-1.0, 1.0]).astype(complex)
_LOWER = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
_ID2 = np.eye(2, dtype=complex)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FermionAlgebra(AlgebraModel):
    """CAR algebra on ``modes`` modes with the Powers state ``phi_lambda``."""

    modes: int
    lam: float

    def __post_init__(self):
        if int(self.modes) != self.modes or not 1 <= self.modes <= MAX_MODES:
            raise InputError(f"modes must be an integer in 1..{MAX_MODES}")
        if not 0 < self.lam < 0.5:
            raise InputError("lambda must lie in (0, 1/2)")

    def __eq__(self, other):
        return isinstance(other, FermionAlgebra) and (other.modes, other.lam) == (self.modes, self.lam)

    def __hash__(self):
        return hash(("fermion", self.modes, self.lam))

    @property
    def model_id(self) -> str:
        return f"CAR(m={self.modes},lambda={self.lam:g})"

    @property
    def dim(self) -> int:
        return 2 ** self.modes

    @property
    def beta(self) -> float:
        return math.log((1 - self.lam) / self.lam)

    @property
    def exp_beta(self) -> float:
        return (1 - self.lam) / self.lam

    def kms_context(self) -> KmsContext:
        return KmsContext(self.beta, True, None, self.exp_beta, self.model_id)

    @cached_property
    def occupation(self) -> np.ndarray:
        b = np.arange(self.dim)
        return np.array([bin(i).count("1") for i in b])

    @cached_property
    def degree_matrix(self) -> np.ndarray:
        occ = self.occupation
        return occ[:, None] - occ[None, :]

    @cached_property
    def weights(self) -> np.ndarray:
        """Diagonal of ``h / 2^m``: product of ``1-lambda`` (empty) or ``lambda`` (occupied)."""
        occ = self.occupation
        return (1 - self.lam) ** (self.modes - occ) * self.lam ** occ

    # payload hooks ------------------------------------------------------
    def p_zero(self):
        return _frozen(np.zeros((self.dim, self.dim)))

    def p_unit(self):
        return _frozen(np.eye(self.dim))

    def p_add(self, x, y):
        return _frozen(x + y)

    def p_scale(self, x, c):
        return _frozen(x * c)

    def p_mul(self, x, y):
        return _frozen(x @ y)

    def p_adjoint(self, x):
        return _frozen(x.conj().T)

    def p_norm(self, x) -> float:
        return float(np.linalg.norm(x))

    def p_tau(self, x):
        return complex(np.dot(self.weights, np.diag(x)))

    def p_is_positive(self, x, tol=1e-12):
        if np.linalg.norm(x - x.conj().T) > tol:
            return False
        return bool(np.linalg.eigvalsh(x).min() >= -tol)

    def p_trace_table(self, x, ctx):
        tau = self.p_tau(x)
        positive = bool(self.p_is_positive(x))
        if positive:
            tau = _real(tau)
        return SpectralTraceTable.full(self.beta, tau, self.exp_beta, positive)

    # elements -----------------------------------------------------------
    def from_matrix(self, x, origin: str | None = None) -> GradedElement:
        return degree_decompose(self, x, origin)

    def generator(self, j: int) -> GradedElement:
        return self.from_matrix(jordan_wigner(j, self), origin=f"a{j}")

    def parse(self, text: str) -> GradedElement:
        factors = parse_fermion_word(text, self.modes)
        x = np.eye(self.dim, dtype=complex)
        for j, star in factors:
            a = jordan_wigner(j, self)
            x = x @ (a.conj().T if star else a)
        return self.from_matrix(x, origin=text)

    def matrix(self, a: GradedElement) -> np.ndarray:
        """Reassemble the full matrix from the components."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for p in a.components.values():
            out = out + p
        return out


def _real(z, tol: float = 1e-10) -> float:
    z = complex(z)
    if abs(z.imag) > tol * max(1.0, abs(z.real)):
        raise InputError(f"expected a real trace value, got {z}")
    return z.real


def jordan_wigner(j: int, ctx: FermionAlgebra) -> np.ndarray:
    """The matrix of ``a_j``; CAR relations hold exactly."""
    m = ctx.modes
    if int(j) != j or not 1 <= j <= m:
        raise InputError(f"mode index {j} outside 1..{m}")
    factors = [_S3] * (j - 1) + [_LOWER] + [_ID2] * (m - j)
    return _frozen(reduce(np.kron, factors))


def degree_decompose(ctx: FermionAlgebra, x, origin: str | None = None) -> GradedElement:
    """Split a matrix into gauge-homogeneous components by occupation difference."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (ctx.dim, ctx.dim):
        raise InputError(f"expected a {ctx.dim}x{ctx.dim} matrix, got {x.shape}")
    deg = ctx.degree_matrix
    comps = {}
    for k in range(-ctx.modes, ctx.modes + 1):
        part = np.where(deg == k, x, 0)
        if np.any(part):
            comps[k] = _frozen(part)
    return ctx.element(comps, origin)


def powers_state(x, ctx: FermionAlgebra) -> complex:
    """``phi_lambda(x) = tr(h x) / 2^m`` with ``h = (x) diag(2(1-lambda), 2 lambda)``."""
    if isinstance(x, GradedElement):
        return ctx.p_tau(x.components[0]) if 0 in x.components else 0j
    x = np.asarray(x, dtype=complex)
    return complex(np.dot(ctx.weights, np.diag(x)))


def spectral_trace_fermion(f: GradedElement, n: int, ctx: FermionAlgebra) -> float:
    """``Tr_phi(f Phi_n) = e^{n beta} phi_lambda(f)`` (full spectral subspaces)."""
    if any(k != 0 for k in f.degrees):
        raise InputError(f"spectral_trace_fermion needs degree 0, got {list(f.degrees)}")
    if 0 in f.components and ctx.p_is_positive(f.components[0]) is False:
        raise InputError("spectral_trace_fermion needs a positive element")
    return ctx.exp_beta ** n * _real(powers_state(f, ctx))


def closed_form_fermion(factors, lam: float) -> float | None:
    """``-n (1+e^beta)^{-n} = -n lambda^n`` for a product of n distinct a_j; else None."""
    idx = [j for j, star in factors]
    if not factors or any(star for _, star in factors) or len(set(idx)) != len(idx):
        return None
    n = len(factors)
    return -n * lam ** n


# ---------------------------------------------------------------------------
# Word literals:  "a1 a2* a3"
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"a(\d+)(\*?)")


def parse_fermion_word(text: str, modes: int | None = None) -> list[tuple[int, bool]]:
    """Parse whitespace-separated ``a<j>`` / ``a<j>*`` factors; empty text is the identity."""
    out = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            return out
        m = _TOKEN.match(text, pos)
        if m is None:
            raise WordParseError("expected a factor like 'a1' or 'a2*'", text, len(text[:pos].encode()))
        j = int(m.group(1))
        if j < 1 or (modes is not None and j > modes):
            raise WordParseError(f"mode index {j} out of range", text, len(text[:pos].encode()))
        end = m.end()
        if end < len(text) and not text[end].isspace():
            raise WordParseError("factors must be separated by spaces", text, len(text[:end].encode()))
        out.append((j, bool(m.group(2))))
        pos = end
