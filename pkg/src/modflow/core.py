"""Degree-graded *-algebras with a circle action and a KMS functional.

An element is a finite map ``degree -> homogeneous component``.  What a
component *is* depends on the model (a linear combination of Cuntz words,
a dense matrix, a combination of abstract symbols, or a block matrix of any
of those); the model object supplies the payload arithmetic and this module
supplies everything that only depends on the grading.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Mapping

from .errors import InputError

PRUNE_TOL = 1e-13


class AlgebraModel:
    """Payload arithmetic for one concrete algebra.

    Subclasses implement the payload hooks below.  Payloads are treated as
    immutable values; no hook may modify its arguments.
    """

    exact = False
    prune_tol = PRUNE_TOL

    @property
    def model_id(self) -> str:
        raise NotImplementedError

    # payload hooks -----------------------------------------------------
    def p_zero(self):
        raise NotImplementedError

    def p_unit(self):
        raise NotImplementedError

    def p_add(self, x, y):
        raise NotImplementedError

    def p_scale(self, x, c):
        raise NotImplementedError

    def p_mul(self, x, y):
        raise NotImplementedError

    def p_adjoint(self, x):
        raise NotImplementedError

    def p_norm(self, x) -> float:
        """A norm-like size; exactly 0 iff the payload is zero for exact models."""
        raise NotImplementedError

    def p_is_zero(self, x, tol: float | None = None) -> bool:
        return self.p_norm(x) <= (self.prune_tol if tol is None else tol)

    def p_is_negligible(self, x) -> bool:
        """Cheap test used to prune components at construction."""
        return self.p_is_zero(x)

    def p_tau(self, x):
        """The trace on the fixed-point algebra (degree-0 payloads)."""
        raise NotImplementedError

    def p_trace_table(self, x, ctx: "KmsContext"):
        """``n -> Tr_phi(x Phi_n)`` for a degree-0 payload, as a table."""
        raise NotImplementedError

    def p_is_positive(self, x, tol: float = 1e-12) -> bool | None:
        """Positivity of a degree-0 payload, or None if the model cannot tell."""
        return None

    # helpers -------------------------------------------------------------
    def element(self, components: Mapping[int, Any], origin: str | None = None) -> "GradedElement":
        return GradedElement.build(self, components, origin)

    def one(self) -> "GradedElement":
        return self.element({0: self.p_unit()}, origin="1")

    def zero(self) -> "GradedElement":
        return self.element({})


@dataclass(frozen=True, eq=False)
class GradedElement:
    """Finite sum of homogeneous components ``a_k``, keyed by degree."""

    model: AlgebraModel
    components: Mapping[int, Any]
    origin: str | None = None

    @classmethod
    def build(cls, model: AlgebraModel, components: Mapping[int, Any],
              origin: str | None = None) -> "GradedElement":
        kept = {int(k): p for k, p in components.items() if not model.p_is_negligible(p)}
        return cls(model, MappingProxyType(dict(sorted(kept.items()))), origin)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(self.components)

    def component(self, k: int) -> "GradedElement":
        if k in self.components:
            return GradedElement(self.model, MappingProxyType({k: self.components[k]}))
        return self.model.zero()

    def homogeneous_parts(self):
        for k in self.components:
            yield k, self.component(k)

    def _check(self, other: "GradedElement") -> None:
        if not isinstance(other, GradedElement):
            raise InputError(f"expected a GradedElement, got {type(other).__name__}")
        if other.model != self.model:
            raise InputError(f"model mismatch: {self.model.model_id} vs {other.model.model_id}")

    def __add__(self, other: "GradedElement") -> "GradedElement":
        self._check(other)
        comps = dict(self.components)
        for k, p in other.components.items():
            comps[k] = self.model.p_add(comps[k], p) if k in comps else p
        return GradedElement.build(self.model, comps)

    def __neg__(self) -> "GradedElement":
        return self.scaled(-1)

    def __sub__(self, other: "GradedElement") -> "GradedElement":
        return self + (-other)

    def scaled(self, c) -> "GradedElement":
        return GradedElement.build(
            self.model, {k: self.model.p_scale(p, c) for k, p in self.components.items()})

    def __mul__(self, other):
        if isinstance(other, GradedElement):
            return multiply(self, other)
        return self.scaled(other)

    def __rmul__(self, c):
        return self.scaled(c)

    def __matmul__(self, other: "GradedElement") -> "GradedElement":
        return multiply(self, other)

    @property
    def H(self) -> "GradedElement":
        return adjoint(self)

    def norm(self) -> float:
        return max((self.model.p_norm(p) for p in self.components.values()), default=0.0)

    def is_zero(self, tol: float | None = None) -> bool:
        return all(self.model.p_is_zero(p, tol) for p in self.components.values())

    def equals(self, other: "GradedElement", tol: float | None = None) -> bool:
        """Model-delegated equality: exact for symbolic models, tolerance otherwise."""
        return (self - other).is_zero(tol)

    def __repr__(self) -> str:
        label = f" {self.origin!r}" if self.origin else ""
        return f"<GradedElement{label} {self.model.model_id} degrees={list(self.degrees)}>"


@dataclass(frozen=True)
class KmsContext:
    """Inverse temperature, fullness flag and spectral-trace provider.

    ``exp_beta`` carries ``e^beta`` exactly when the model allows it (a
    ``Fraction`` for the Cuntz algebra), so that degree twists and the
    finite spectral-flow sums stay in exact arithmetic there.
    """

    beta: float
    full_subspaces: bool
    trace: Callable[[GradedElement], Any] | None = None
    exp_beta: Any = None
    label: str = ""

    def __post_init__(self):
        if self.beta == 0 or not math.isfinite(self.beta):
            raise InputError("KmsContext: beta must be finite and nonzero")
        if self.exp_beta is None:
            object.__setattr__(self, "exp_beta", math.exp(self.beta))

    def twist_factor(self, k: int):
        return self.exp_beta ** k

    def table(self, f: GradedElement):
        """Spectral-trace table ``n -> Tr_phi(f Phi_n)`` of a degree-0 element."""
        bad = [k for k in f.degrees if k != 0]
        if bad:
            raise InputError(f"spectral traces need a degree-0 element, got degrees {bad}")
        if self.trace is not None:
            return self.trace(f)
        payload = f.components.get(0, f.model.p_zero())
        return f.model.p_trace_table(payload, self)

    def spectral_trace(self, f: GradedElement, n: int):
        """``Tr_phi(f Phi_n)`` for a degree-0 element ``f``."""
        return self.table(f)(n)


@dataclass(frozen=True)
class ModularityReport:
    is_partial_isometry: bool
    is_modular: bool
    degrees: list[int]
    components_partial_isometries: bool
    component_sources_orthogonal: bool
    component_ranges_orthogonal: bool
    max_violation: float
    #: size of v_0* v_0 - v_0 v_0*, recorded for matrix-valued inputs
    degree0_defect: float = 0.0
    notes: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def multiply(a: GradedElement, b: GradedElement) -> GradedElement:
    """Degree-additive product ``(ab)_m = sum_{k+l=m} a_k b_l``."""
    a._check(b)
    model = a.model
    out: dict[int, Any] = {}
    for k, x in a.components.items():
        for l, y in b.components.items():
            z = model.p_mul(x, y)
            out[k + l] = model.p_add(out[k + l], z) if k + l in out else z
    return GradedElement.build(model, out)


def adjoint(a: GradedElement) -> GradedElement:
    return GradedElement.build(
        a.model, {-k: a.model.p_adjoint(p) for k, p in a.components.items()})


def _scale_degrees(a: GradedElement, factor: Callable[[int], Any]) -> GradedElement:
    return GradedElement.build(
        a.model, {k: a.model.p_scale(p, factor(k)) for k, p in a.components.items()})


def twist(a: GradedElement, ctx: KmsContext) -> GradedElement:
    """Analytic continuation ``sigma_{-i beta}``: degree k scaled by ``e^{k beta}``."""
    return _scale_degrees(a, ctx.twist_factor)


def inverse_twist(a: GradedElement, ctx: KmsContext) -> GradedElement:
    return _scale_degrees(a, lambda k: ctx.twist_factor(-k))


def gauge(a: GradedElement, t: float) -> GradedElement:
    """The circle action ``sigma_t``: degree k scaled by ``e^{ikt}``."""
    return _scale_degrees(a, lambda k: cmath.exp(1j * k * t) if k else 1)


def commutator_with_D(a: GradedElement) -> GradedElement:
    """``[D, a]`` for the generator D of the circle action: degree k scaled by k."""
    return _scale_degrees(a, lambda k: k)


def phi(a: GradedElement, ctx: KmsContext | None = None):
    """The KMS functional ``tau o Phi``: only the degree-0 component counts."""
    if 0 not in a.components:
        return 0
    return a.model.p_tau(a.components[0])


def kms_identity_residual(a: GradedElement, b: GradedElement, ctx: KmsContext) -> float:
    """``|phi(ba) - phi(twist(a) b)|``."""
    lhs = phi(multiply(b, a), ctx)
    rhs = phi(multiply(twist(a, ctx), b), ctx)
    return float(abs(lhs - rhs))


def spectral_table(f: GradedElement, ctx: KmsContext):
    """Spectral-trace table of a degree-0 element (zero element gives zeros)."""
    return ctx.table(f)


def _size(x: GradedElement) -> float:
    return float(x.norm())


def classify_modular(v: GradedElement, tol: float = 1e-10) -> ModularityReport:
    """Decide whether ``v`` is a modular partial isometry.

    ``v`` is modular iff every homogeneous component is a partial isometry and
    the components have mutually orthogonal sources and mutually orthogonal
    ranges.
    """
    if not tol > 0:
        raise InputError("classify_modular: tol must be positive")
    vs = adjoint(v)
    worst = 0.0

    def residual(x: GradedElement) -> tuple[bool, float]:
        nonlocal worst
        ok = x.is_zero(tol)
        size = _size(x)
        worst = max(worst, size)
        return ok, size

    is_pi, _ = residual(multiply(multiply(v, vs), v) - v)

    parts = list(v.homogeneous_parts())
    comp_ok = True
    sources, ranges = [], []
    for _, vk in parts:
        vks = adjoint(vk)
        ok, _ = residual(multiply(multiply(vk, vks), vk) - vk)
        comp_ok &= ok
        sources.append(multiply(vks, vk))
        ranges.append(multiply(vk, vks))

    src_ok = rng_ok = True
    for i in range(len(parts)):
        for j in range(len(parts)):
            if i == j:
                continue
            ok, _ = residual(multiply(sources[i], sources[j]))
            src_ok &= ok
            ok, _ = residual(multiply(ranges[i], ranges[j]))
            rng_ok &= ok

    v0 = v.component(0)
    defect = _size(multiply(adjoint(v0), v0) - multiply(v0, adjoint(v0)))
    modular = bool(is_pi and comp_ok and src_ok and rng_ok)
    return ModularityReport(
        is_partial_isometry=bool(is_pi),
        is_modular=modular,
        degrees=list(v.degrees),
        components_partial_isometries=bool(comp_ok),
        component_sources_orthogonal=bool(src_ok),
        component_ranges_orthogonal=bool(rng_ok),
        max_violation=worst,
        degree0_defect=defect,
    )


def is_partial_isometry(v: GradedElement, tol: float = 1e-10) -> bool:
    return (multiply(multiply(v, adjoint(v)), v) - v).is_zero(tol)


# ---------------------------------------------------------------------------
# Matrices over a model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixAmplification(AlgebraModel):
    """``M_size(A)`` graded entrywise; trace is ``tau (x) Tr``."""

    base: AlgebraModel
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise InputError("matrix size must be positive")

    @property
    def exact(self):  # type: ignore[override]
        return self.base.exact

    @property
    def prune_tol(self):  # type: ignore[override]
        return self.base.prune_tol

    @property
    def model_id(self) -> str:
        return f"M{self.size}({self.base.model_id})"

    def _map(self, f, *xs):
        n = self.size
        return tuple(tuple(f(*(x[i][j] for x in xs)) for j in range(n)) for i in range(n))

    def p_zero(self):
        z = self.base.p_zero()
        return tuple(tuple(z for _ in range(self.size)) for _ in range(self.size))

    def p_unit(self):
        z, u = self.base.p_zero(), self.base.p_unit()
        return tuple(tuple(u if i == j else z for j in range(self.size)) for i in range(self.size))

    def p_add(self, x, y):
        return self._map(self.base.p_add, x, y)

    def p_scale(self, x, c):
        return self._map(lambda e: self.base.p_scale(e, c), x)

    def p_mul(self, x, y):
        b, n = self.base, self.size
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = b.p_zero()
                for k in range(n):
                    if b.p_is_negligible(x[i][k]) or b.p_is_negligible(y[k][j]):
                        continue
                    acc = b.p_add(acc, b.p_mul(x[i][k], y[k][j]))
                row.append(acc)
            rows.append(tuple(row))
        return tuple(rows)

    def p_adjoint(self, x):
        n = self.size
        return tuple(tuple(self.base.p_adjoint(x[j][i]) for j in range(n)) for i in range(n))

    def p_norm(self, x) -> float:
        return sum(self.base.p_norm(e) for row in x for e in row)

    def p_is_zero(self, x, tol=None) -> bool:
        return all(self.base.p_is_zero(e, tol) for row in x for e in row)

    def p_is_negligible(self, x) -> bool:
        return all(self.base.p_is_negligible(e) for row in x for e in row)

    def p_tau(self, x):
        return sum(self.base.p_tau(x[i][i]) for i in range(self.size)
                   if not self.base.p_is_negligible(x[i][i]))

    def p_trace_table(self, x, ctx):
        tables = [self.base.p_trace_table(x[i][i], ctx) for i in range(self.size)
                  if not self.base.p_is_negligible(x[i][i])]
        if not tables:
            return self.base.p_trace_table(self.base.p_zero(), ctx)
        out = tables[0]
        for t in tables[1:]:
            out = out + t
        return out

    def p_is_positive(self, x, tol=1e-12):
        return None


def block(rows: list[list[GradedElement]]) -> GradedElement:
    """Assemble a square block matrix of elements over one model."""
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise InputError("block: need a square, nonempty array of elements")
    base = rows[0][0].model
    for r in rows:
        for e in r:
            if e.model != base:
                raise InputError("block: all entries must share a model")
    model = MatrixAmplification(base, n)
    degrees = sorted({k for r in rows for e in r for k in e.degrees})
    comps = {}
    for k in degrees:
        comps[k] = tuple(
            tuple(rows[i][j].components.get(k, base.p_zero()) for j in range(n))
            for i in range(n))
    return GradedElement.build(model, comps)


def entry(a: GradedElement, i: int, j: int) -> GradedElement:
    if not isinstance(a.model, MatrixAmplification):
        raise InputError("entry: element is not a block matrix")
    return GradedElement.build(a.model.base, {k: p[i][j] for k, p in a.components.items()})


def direct_sum(a: GradedElement, b: GradedElement) -> GradedElement:
    """``a (+) b = diag(a, b)``."""
    a._check(b)
    z = a.model.zero()
    return block([[a, z], [z, b]])


def doubling_unitary(v: GradedElement, tol: float = 1e-10) -> GradedElement:
    """``u_v = [[1 - v*v, v*], [v, 1 - vv*]]``, a self-adjoint unitary."""
    if not is_partial_isometry(v, tol):
        raise InputError("doubling_unitary: input is not a partial isometry")
    one = v.model.one()
    vs = adjoint(v)
    return block([[one - multiply(vs, v), vs], [v, one - multiply(v, vs)]])
