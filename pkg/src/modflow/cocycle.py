"""Twisted cochains on a graded algebra and their coboundary checks.

Conventions (twist ``sigma`` scales degree k by ``e^{k beta}``):

* ``(b c)(a0, ..., ap) = sum_{i<p} (-1)^i c(.., a_i a_{i+1}, ..)
  + (-1)^p c(sigma(ap) a0, a1, ..., a_{p-1})``
* ``(B psi)(a0) = psi(1, a0)``
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from . import core
from .core import GradedElement, KmsContext
from .errors import InputError, NumericalFailure
from .numerics import (Estimate, eta_series, richardson, theta_series, zeta_series)

DIXMIER_GRID = tuple(2.0 ** j for j in range(3, 13))


@dataclass(frozen=True)
class TwistedCochain:
    """A multilinear functional of ``arity`` elements, optionally depending on r."""

    arity: int
    evaluator: Callable
    ctx: KmsContext
    name: str = ""

    def __post_init__(self):
        if self.arity not in (1, 2, 3):
            raise InputError("cochain arity must be 1, 2 or 3")

    def __call__(self, *args, r=None):
        if len(args) != self.arity:
            raise InputError(f"{self.name or 'cochain'} takes {self.arity} arguments, got {len(args)}")
        return self.evaluator(*args) if r is None else self.evaluator(*args, r=r)

    def twist(self, a: GradedElement) -> GradedElement:
        return core.twist(a, self.ctx)


def _require_full(ctx: KmsContext, what: str) -> None:
    if not ctx.full_subspaces:
        raise InputError(f"{what} needs full spectral subspaces; use the residue form instead")


def phi1(a0: GradedElement, a1: GradedElement, ctx: KmsContext):
    """``phi(a0 [D, a1])``."""
    _require_full(ctx, "phi1")
    return core.phi(core.multiply(a0, core.commutator_with_D(a1)), ctx)


def _pairs(a0: GradedElement, a1: GradedElement):
    """``(m, a0_{-m} a1_m)`` for every degree m of a1 with a matching a0 component."""
    for m, x1 in a1.homogeneous_parts():
        if -m in a0.components:
            yield m, core.multiply(a0.component(-m), x1)


def _phi_d(f: GradedElement, ctx: KmsContext):
    return ctx.table(f).phi_d_sequence()


def eta_r(a0: GradedElement, a1: GradedElement, r: float, ctx: KmsContext):
    """``(1/2) int_1^inf phi_D((sigma(a1) a0 - a0 a1) D (1+sD^2)^-r) s^-1/2 ds``.

    Evaluated as ``sum_j s_j [g(j+m) - g(j)]`` with ``s_j = phi_D(a0 a1 Phi_j)``,
    which is analytic for r > 1/2.
    """
    total = 0
    for m, f in _pairs(a0, a1):
        if m:
            total += eta_series(_phi_d(f, ctx), m, r).value
    return total


def first_term_r(a0: GradedElement, a1: GradedElement, r: float, ctx: KmsContext):
    """``phi_D(a0 [D, a1] (1+D^2)^-r)``."""
    total = 0
    for m, f in _pairs(a0, a1):
        if m:
            total += zeta_series(_phi_d(f, ctx).scaled(m), r).value
    return total


def psi_r(a0: GradedElement, a1: GradedElement, r: float, ctx: KmsContext):
    """``phi_D(a0 [D, a1] (1+D^2)^-r) + eta^r(a0, a1)``."""
    return first_term_r(a0, a1, r, ctx) + eta_r(a0, a1, r, ctx)


def theta_r(a0: GradedElement, r: float, ctx: KmsContext):
    """``-(1/2) int_1^inf phi_D(a0 D (1+sD^2)^-r) s^-1/2 ds`` for r > 1.

    Only used through the identity ``eta^r = b theta^r``.
    """
    if r <= 1:
        raise InputError("theta_r is only defined for r > 1")
    if 0 not in a0.components:
        return 0
    return theta_series(_phi_d(a0.component(0), ctx), r).value


def phi1_cochain(ctx: KmsContext) -> TwistedCochain:
    return TwistedCochain(2, lambda a0, a1: phi1(a0, a1, ctx), ctx, "phi1")


def psi_cochain(ctx: KmsContext) -> TwistedCochain:
    return TwistedCochain(2, lambda a0, a1, r: psi_r(a0, a1, r, ctx), ctx, "psi")


def eta_cochain(ctx: KmsContext) -> TwistedCochain:
    return TwistedCochain(2, lambda a0, a1, r: eta_r(a0, a1, r, ctx), ctx, "eta")


def theta_cochain(ctx: KmsContext) -> TwistedCochain:
    return TwistedCochain(1, lambda a0, r: theta_r(a0, r, ctx), ctx, "theta")


def b_twisted(c: TwistedCochain) -> TwistedCochain:
    """Twisted Hochschild coboundary, raising the arity by one."""
    p = c.arity
    if p >= 3:
        raise InputError("b_twisted is defined here for arity 1 and 2 cochains")

    def evaluate(*a, r=None):
        kw = {} if r is None else {"r": r}
        total = 0
        for i in range(p):
            args = list(a[:i]) + [core.multiply(a[i], a[i + 1])] + list(a[i + 2:])
            total += (-1) ** i * c(*args, **kw)
        last = core.multiply(c.twist(a[p]), a[0])
        total += (-1) ** p * c(last, *a[1:p], **kw)
        return total

    return TwistedCochain(p + 1, evaluate, c.ctx, f"b({c.name})")


def B_twisted(c: TwistedCochain) -> TwistedCochain:
    """``(B psi)(a0) = psi(1, a0)``."""
    if c.arity != 2:
        raise InputError("B_twisted needs an arity-2 cochain")

    def evaluate(a0, r=None):
        one = a0.model.one()
        return c(one, a0) if r is None else c(one, a0, r=r)

    return TwistedCochain(1, evaluate, c.ctx, f"B({c.name})")


def cyclicity_residual(a0: GradedElement, a1: GradedElement, ctx: KmsContext) -> float:
    """``|phi1(a0, a1) + phi1(sigma(a1), a0)|``."""
    value = phi1(a0, a1, ctx) + phi1(core.twist(a1, ctx), a0, ctx)
    return float(abs(value))


# ---------------------------------------------------------------------------
# Dixmier-type limit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DixmierResult:
    value: float
    error: float
    grid: tuple
    samples: tuple
    bound: float


def dixmier_limit(a: GradedElement, ctx: KmsContext, r_grid: Sequence[float] = DIXMIER_GRID,
                  ) -> DixmierResult:
    """Limit as r -> inf of ``(1/r) sum_n phi_D(a Phi_n) (1+n^2)^(-1/2 - 1/(2r))``.

    Samples on the grid (default ``r = 2^j``, j = 3..12) are extrapolated in
    ``h = 1/r``.  Under full spectral subspaces the limit is ``2 phi(a)``.
    """
    bad = [k for k in a.degrees if k != 0]
    if bad:
        raise InputError(f"dixmier_limit needs a degree-0 element, got degrees {bad}")
    if 0 in a.components and a.model.p_is_positive(a.components[0]) is False:
        raise InputError("dixmier_limit needs a positive element")
    grid = tuple(float(r) for r in r_grid)
    if len(grid) < 3 or any(r <= 0 for r in grid):
        raise InputError("dixmier_limit needs at least three positive grid points")
    bound = 2 * complex(core.phi(a, ctx)).real
    if not a.components:
        return DixmierResult(0.0, 0.0, grid, tuple(0.0 for _ in grid), 0.0)
    seq = _phi_d(a, ctx)
    samples = tuple(zeta_series(seq, 0.5 + 0.5 / r).value / r for r in grid)
    hs = [1.0 / r for r in grid]
    est: Estimate = richardson(hs, list(samples))
    if est.value > bound * (1 + 1e-3) + 1e-12:
        raise NumericalFailure(f"Dixmier estimate {est.value:.6g} exceeds 2 phi(a) = {bound:.6g}")
    return DixmierResult(float(est.value), float(est.error), grid, samples, bound)
