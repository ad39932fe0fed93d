"""Modular index of a modular partial isometry by three routes.

* trace route:    finite double sum of spectral traces of ``v_k v_k*``;
* Laurent route:  the equivariant flow as a polynomial in chi, evaluated at
  ``chi = e^{-beta}``;
* residue route:  residue at r = 1/2 of the zeta-regularised first term plus
  the eta correction.

All three read spectral traces through ``KmsContext.table`` so that every
model goes through the same code path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Iterable

from . import core
from .core import GradedElement, KmsContext
from .errors import InputError, NumericalFailure
from .laurent import LaurentPolynomial
from .numerics import (BoundedSequence, Estimate, eta_residue, eta_series, residue_at_half,
                       series_residue, zeta_series)

ROUTES = ("trace", "laurent", "residue")


def _real(z, tol: float = 1e-10):
    if isinstance(z, complex):
        if abs(z.imag) > tol * max(1.0, abs(z.real)):
            raise NumericalFailure(f"spectral flow has imaginary part {z.imag:.3g}")
        return z.real
    return z


def require_modular(v: GradedElement, tol: float = 1e-10) -> core.ModularityReport:
    report = core.classify_modular(v, tol)
    if not report.is_modular:
        raise InputError("input is not a modular partial isometry "
                         f"(max violation {report.max_violation:.3g})")
    return report


def _range_tables(v: GradedElement, ctx: KmsContext):
    """``k -> table of v_k v_k*`` for the nonzero-degree components."""
    out = {}
    for k, vk in v.homogeneous_parts():
        if k != 0:
            out[k] = ctx.table(core.multiply(vk, core.adjoint(vk)))
    return out


def _chi(ctx: KmsContext):
    e = ctx.exp_beta
    return Fraction(1) / e if isinstance(e, Fraction) else 1.0 / e


def _sf_terms(v: GradedElement, ctx: KmsContext):
    """Yield ``(n, sign * Tr(v_k v_k* Phi_n))`` for the finite double sum."""
    for k, table in _range_tables(v, ctx).items():
        if k < 0:
            for n in range(k, 0):
                yield n, table(n)
        else:
            for n in range(0, k):
                yield n, -table(n)


def sf_trace(v: GradedElement, ctx: KmsContext, check: bool = True):
    """``sum_{k<0} sum_{k<=n<0} e^{-beta n} Tr(v_k v_k* Phi_n)
    - sum_{k>0} sum_{0<=n<k} e^{-beta n} Tr(v_k v_k* Phi_n)``.

    Exact (a ``Fraction``) when the model and context are exact.
    """
    if check:
        require_modular(v)
    chi = _chi(ctx)
    total = 0
    for n, t in _sf_terms(v, ctx):
        total += chi ** n * t
    return _real(total)


def sf_equivariant(v: GradedElement, ctx: KmsContext, check: bool = True) -> LaurentPolynomial:
    """Equivariant flow as a Laurent polynomial in chi."""
    if check:
        require_modular(v)
    coeffs: dict[int, object] = {}
    for n, t in _sf_terms(v, ctx):
        coeffs[n] = coeffs.get(n, 0) + _real(t)
    return LaurentPolynomial(coeffs)


def evaluate_at_exp_minus_beta(p: LaurentPolynomial, ctx: KmsContext):
    return p.evaluate(_chi(ctx))


def laurent_adjoint_relation_check(v: GradedElement, ctx: KmsContext) -> float:
    """Max coefficient of ``sf_eq(v*) + chi^{-k} sf_eq(v)`` for homogeneous ``v``."""
    degrees = [k for k in v.degrees]
    if len(degrees) > 1:
        raise InputError("laurent_adjoint_relation_check needs a homogeneous element")
    if not degrees or degrees[0] == 0:
        return 0.0
    k = degrees[0]
    lhs = sf_equivariant(core.adjoint(v), ctx)
    rhs = -sf_equivariant(v, ctx).shift(-k)
    return float(lhs.max_coeff_deviation(rhs))


# ---------------------------------------------------------------------------
# Residue route
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidueData:
    """phi_D sequences feeding the residue route.

    ``first`` is ``s_n = sum_k (-k) phi_D(v_k v_k* Phi_n)``; ``eta`` lists
    ``(m, s)`` with ``m = -k`` the degree of ``v_k*`` and
    ``s_n = phi_D(v_k v_k* Phi_n)``.
    """

    first: BoundedSequence
    eta: tuple

    def first_term(self, r: float) -> float:
        return zeta_series(self.first, r).value

    def eta_term(self, r: float) -> float:
        return math.fsum(eta_series(s, m, r).value for m, s in self.eta)

    def __call__(self, r: float) -> float:
        return self.first_term(r) + self.eta_term(r)

    def closed_residues(self) -> tuple[float, float]:
        first = series_residue(self.first)
        eta = math.fsum(eta_residue(s, m) for m, s in self.eta)
        return first, eta


def residue_data(v: GradedElement, ctx: KmsContext) -> ResidueData:
    first = BoundedSequence.zero()
    eta = []
    for k, table in _range_tables(v, ctx).items():
        s = table.phi_d_sequence()
        first = first + s.scaled(-k)
        eta.append((-k, s))
    return ResidueData(first, tuple(eta))


@dataclass(frozen=True)
class ResidueResult:
    value: float
    error: float
    first: Estimate
    eta: Estimate
    closed_first: float
    closed_eta: float

    @property
    def closed(self) -> float:
        return self.closed_first + self.closed_eta


def sf_residue(v: GradedElement, ctx: KmsContext, offsets=None, check: bool = True) -> ResidueResult:
    """Residue at r = 1/2 of ``phi_D(v[D,v*](1+D^2)^-r) + eta^r(v, v*)``.

    The two pieces are extrapolated separately (the eta piece is what gets
    reported as the eta contribution); exact residues from the tail constants
    are returned alongside as a cross-check.
    """
    if check:
        require_modular(v)
    data = residue_data(v, ctx)
    first = residue_at_half(data.first_term, offsets)
    eta = residue_at_half(data.eta_term, offsets)
    cf, ce = data.closed_residues()
    return ResidueResult(first.value + eta.value, first.error + eta.error, first, eta, cf, ce)


def kernel_correction(v: GradedElement, ctx: KmsContext, check: bool = True):
    """``phi_D(vv* Phi_0) - phi_D(v Phi_0 v*)``.

    Cross terms have nonzero degree and drop out; since
    ``v_k Phi_0 v_k* = Phi_k v_k v_k* Phi_k`` the value is
    ``sum_k [Tr(v_k v_k* Phi_0) - e^{-k beta} Tr(v_k v_k* Phi_k)]``.
    """
    if check:
        require_modular(v)
    chi = _chi(ctx)
    total = 0
    for k, table in _range_tables(v, ctx).items():
        total += table(0) - chi ** k * table(k)
    return _real(total)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class SfReport:
    model: str
    degrees: list
    sf_trace: object = None
    sf_laurent: LaurentPolynomial | None = None
    sf_laurent_at_exp_minus_beta: object = None
    sf_residue: float | None = None
    sf_residue_error: float | None = None
    sf_residue_closed: float | None = None
    eta_contribution: float | None = None
    eta_contribution_closed: float | None = None
    kernel_correction: object = None
    closed_form: object = None
    closed_form_source: str | None = None
    closed_form_deviation: float | None = None
    route_agreement: float = 0.0
    extrapolation_dependent: bool = False
    assumptions: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["sf_laurent"] = None if self.sf_laurent is None else dict(self.sf_laurent.coeffs)
        return d


def _route_values(rep: SfReport) -> list[float]:
    vals = [rep.sf_trace, rep.sf_laurent_at_exp_minus_beta, rep.sf_residue]
    return [float(x) for x in vals if x is not None]


def compute_report(v: GradedElement, ctx: KmsContext, routes: Iterable[str] = ROUTES,
                   closed_form=None, closed_form_source: str | None = None,
                   extrapolation_dependent: bool = False, assumptions=(),
                   offsets=None) -> SfReport:
    routes = tuple(routes)
    unknown = set(routes) - set(ROUTES)
    if unknown:
        raise InputError(f"unknown routes {sorted(unknown)}; choose from {ROUTES}")
    mod = require_modular(v)
    rep = SfReport(model=v.model.model_id, degrees=mod.degrees,
                   extrapolation_dependent=extrapolation_dependent,
                   assumptions=list(assumptions))
    if "trace" in routes:
        rep.sf_trace = sf_trace(v, ctx, check=False)
    if "laurent" in routes:
        rep.sf_laurent = sf_equivariant(v, ctx, check=False)
        rep.sf_laurent_at_exp_minus_beta = _real(evaluate_at_exp_minus_beta(rep.sf_laurent, ctx))
    if "residue" in routes:
        res = sf_residue(v, ctx, offsets, check=False)
        rep.sf_residue = float(_real(res.value))
        rep.sf_residue_error = float(res.error)
        rep.sf_residue_closed = float(res.closed)
        rep.eta_contribution = float(_real(res.eta.value))
        rep.eta_contribution_closed = float(res.closed_eta)
    rep.kernel_correction = kernel_correction(v, ctx, check=False)
    vals = _route_values(rep)
    rep.route_agreement = max((abs(a - b) for a in vals for b in vals), default=0.0)
    if closed_form is not None:
        rep.closed_form = closed_form
        rep.closed_form_source = closed_form_source
        rep.closed_form_deviation = max((abs(x - float(closed_form)) for x in vals), default=0.0)
    return rep
