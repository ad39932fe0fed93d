"""Spectral-trace tables and the abstract-isometry model built on them.

A table stores ``n -> Tr_phi(f Phi_n)`` for one degree-0 element ``f`` as an
explicit window plus exponential tails.  Tables are what every route
consumes; the Cuntz and Fermion models produce full-subspace tables, while
the abstract model (used for quantum SU(2)) is given its table directly.
"""
from __future__ import annotations

import contextlib
import contextvars
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from .core import AlgebraModel, GradedElement, KmsContext
from .errors import InputError, TraceInequalityError
from .numerics import BoundedSequence

INEQUALITY_TOL = 1e-12

TABLE_SCHEMA = {
    "type": "object",
    "required": ["beta", "entries", "tail"],
    "properties": {
        "beta": {"type": "number"},
        "degree": {"type": "integer"},
        "entries": {
            "type": "object",
            "patternProperties": {"^-?[0-9]+$": {"type": "number", "minimum": 0}},
            "additionalProperties": False,
        },
        "tail": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["zero", "geometric", "full"]},
                "ratio": {"type": "number", "exclusiveMinimum": 0},
                "anchor": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass
class TraceAudit:
    """Counts inequality checks made while the audit is active."""

    checks: int = 0
    violations: int = 0
    worst_ratio: float = 0.0


_AUDIT: contextvars.ContextVar[TraceAudit | None] = contextvars.ContextVar("trace_audit", default=None)


@contextlib.contextmanager
def trace_audit():
    audit = TraceAudit()
    token = _AUDIT.set(audit)
    try:
        yield audit
    finally:
        _AUDIT.reset(token)


def _exp_power(exp_beta, n: int):
    return exp_beta ** n


@dataclass(frozen=True, eq=False)
class SpectralTraceTable:
    """``n -> Tr_phi(f Phi_n)`` with an explicit window and exponential tails.

    ``seq`` holds the Tr values themselves; its tail ratios may exceed one
    (a full-subspace table grows like ``e^{n beta}``).  ``positive`` marks
    tables of positive elements, for which every access is checked against
    ``Tr_phi(f Phi_n) <= e^{n beta} tau(f)``.
    """

    beta: float
    seq: BoundedSequence
    exp_beta: Any = None
    positive: bool = True
    kind: str = "mixed"
    degree: int | None = None
    assumptions: tuple = ()

    def __post_init__(self):
        if self.exp_beta is None:
            object.__setattr__(self, "exp_beta", math.exp(self.beta))
        if self.seq.lo > 0 or self.seq.hi < 0:
            object.__setattr__(self, "seq", self.seq.widened(0, 0))

    # construction -----------------------------------------------------
    @classmethod
    def full(cls, beta: float, tau, exp_beta=None, positive: bool = True) -> "SpectralTraceTable":
        """``Tr_phi(f Phi_n) = e^{n beta} tau(f)`` for all n."""
        e = math.exp(beta) if exp_beta is None else exp_beta
        seq = BoundedSequence(0, (tau,), left=((tau, 1 / e),), right=((tau, e),))
        return cls(beta, seq, e, positive, "full")

    @classmethod
    def zero_table(cls, beta: float, exp_beta=None) -> "SpectralTraceTable":
        return cls(beta, BoundedSequence.zero(), exp_beta, True, "zero")

    # access -----------------------------------------------------------
    @property
    def tau(self):
        return self.seq(0)

    def bound(self, n: int):
        return _exp_power(self.exp_beta, n) * self.tau

    def _check(self, n: int, value) -> None:
        if not self.positive:
            return
        audit = _AUDIT.get()
        bound = self.bound(n)
        ok = value <= bound + INEQUALITY_TOL * abs(bound) + 1e-300
        if audit is not None:
            audit.checks += 1
            if bound:
                audit.worst_ratio = max(audit.worst_ratio, float(value) / float(bound))
            if not ok:
                audit.violations += 1
        if not ok:
            raise TraceInequalityError(
                f"Tr(f Phi_{n}) = {float(value):.6g} exceeds e^(n beta) tau(f) = {float(bound):.6g}")

    def __call__(self, n: int):
        value = self.seq(n)
        self._check(n, value)
        return value

    def check_inequality(self, extra: int = 4) -> None:
        """Check the window plus a few tail terms on each side."""
        for n in range(self.seq.lo - extra, self.seq.hi + extra + 1):
            self(n)

    # arithmetic -------------------------------------------------------
    def __add__(self, other: "SpectralTraceTable") -> "SpectralTraceTable":
        return SpectralTraceTable(self.beta, self.seq + other.seq, self.exp_beta,
                                  self.positive and other.positive, "mixed",
                                  assumptions=self.assumptions + other.assumptions)

    def scaled(self, c) -> "SpectralTraceTable":
        nonneg = not isinstance(c, complex) and c >= 0
        return SpectralTraceTable(self.beta, self.seq.scaled(c), self.exp_beta,
                                  self.positive and nonneg, self.kind, self.degree,
                                  self.assumptions)

    def shift(self, d: int) -> "SpectralTraceTable":
        """The table ``n -> T(n + d)``; positivity is re-established by checking."""
        s = self.seq
        seq = BoundedSequence(s.lo - d, s.values, s.left, s.right)
        return SpectralTraceTable(self.beta, seq, self.exp_beta, self.positive, self.kind,
                                  assumptions=self.assumptions)

    # phi_D data -------------------------------------------------------
    def phi_d_sequence(self) -> BoundedSequence:
        """``n -> phi_D(f Phi_n) = e^{-beta n} Tr_phi(f Phi_n)`` as a bounded sequence."""
        s, e = self.seq, self.exp_beta
        for n in range(s.lo - 1, s.hi + 2):
            self(n)
        vals = tuple(v * _exp_power(e, -n) for n, v in zip(range(s.lo, s.hi + 1), s.values))
        right = tuple((c * _exp_power(e, -s.hi), p / e) for c, p in s.right)
        left = tuple((c * _exp_power(e, -s.lo), p * e) for c, p in s.left)
        out = BoundedSequence(s.lo, vals, left, right)
        out.check_bounded()
        return out

    def is_full(self, tol: float = 1e-12) -> bool:
        """True when the phi_D sequence is constant (full spectral subspaces)."""
        d = self.phi_d_sequence()
        c = d(0)
        ok_vals = all(abs(v - c) <= tol * max(1.0, abs(c)) for v in d.values)
        cl, cr = d.constant_tails()
        geo = [x for x, p in d.left + d.right if p != 1]
        return ok_vals and not geo and abs(cl - c) <= tol and abs(cr - c) <= tol

    def to_document(self) -> dict:
        s = self.seq
        doc = {"beta": self.beta,
               "entries": {str(n): float(v) for n, v in zip(range(s.lo, s.hi + 1), s.values)}}
        if self.degree is not None:
            doc["degree"] = self.degree
        tails = s.left + s.right
        if not tails:
            doc["tail"] = {"kind": "zero"}
        elif self.kind == "full":
            doc["tail"] = {"kind": "full"}
        elif len(s.left) == len(s.right) == 1 and s.left[0][1] == s.right[0][1]:
            doc["tail"] = {"kind": "geometric", "ratio": float(s.right[0][1])}
            if s.lo == -s.hi:
                doc["tail"]["anchor"] = s.hi
        else:
            raise InputError("table tails cannot be expressed in the document schema")
        return doc


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_table(source) -> SpectralTraceTable:
    """Build a table from a JSON document (dict, JSON text, or path).

    The inequality ``Tr_phi(f Phi_n) <= e^{n beta} Tr_phi(f Phi_0)`` is checked
    on every entry and on the first tail terms; a violation is a load error.
    """
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        try:
            source = Path(source).read_text()
        except OSError as exc:
            raise InputError(f"cannot read table: {exc}") from exc
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as exc:
            raise InputError(f"table is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(source, TABLE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise InputError(f"table schema error: {exc.message}") from exc

    beta = float(source["beta"])
    if beta == 0:
        raise InputError("table: beta must be nonzero")
    entries = {int(k): float(v) for k, v in source["entries"].items()}
    if 0 not in entries:
        raise InputError("table: missing the n = 0 entry (the tau value)")
    lo, hi = min(entries), max(entries)
    missing = [n for n in range(lo, hi + 1) if n not in entries]
    if missing:
        raise InputError(f"table: entries must be contiguous, missing {missing[:5]}")
    tail = source["tail"]
    kind = tail["kind"]
    e = math.exp(beta)

    if kind == "geometric":
        if "ratio" not in tail:
            raise InputError("table: geometric tail needs a ratio")
        rho = float(tail["ratio"])
        anchor = tail.get("anchor")
        if anchor is not None:
            if lo > -anchor or hi < anchor:
                raise InputError(f"table: entries must cover [-{anchor}, {anchor}]")
            for n, v in entries.items():
                if abs(n) > anchor:
                    ref = entries[anchor if n > 0 else -anchor] * rho ** (abs(n) - anchor)
                    if abs(v - ref) > 1e-12 * max(abs(ref), 1e-300):
                        raise InputError(f"table: entry {n} disagrees with the geometric tail")
            lo, hi = -anchor, anchor
        vals = tuple(entries[n] for n in range(lo, hi + 1))
        seq = BoundedSequence(lo, vals, left=((vals[0], rho),), right=((vals[-1], rho),))
    elif kind == "full":
        vals = tuple(entries[n] for n in range(lo, hi + 1))
        seq = BoundedSequence(lo, vals, left=((vals[0], 1 / e),), right=((vals[-1], e),))
    else:
        seq = BoundedSequence(lo, tuple(entries[n] for n in range(lo, hi + 1)))

    table = SpectralTraceTable(beta, seq, e, True, kind, source.get("degree"))
    try:
        table.check_inequality()
        table.phi_d_sequence()
    except TraceInequalityError as exc:
        raise InputError(f"table violates the trace inequality: {exc}") from exc
    return table


# ---------------------------------------------------------------------------
# Abstract isometries
# ---------------------------------------------------------------------------

SYMBOLS = ("1", "v", "v*", "P", "Q")
_DEGREE_SIGN = {"1": 0, "v": 1, "v*": -1, "P": 0, "Q": 0}

# products determined by v being a partial isometry with P = vv*, Q = v*v
_PRODUCTS = {
    ("v", "v*"): "P", ("v*", "v"): "Q",
    ("P", "v"): "v", ("v", "Q"): "v", ("v*", "P"): "v*", ("Q", "v*"): "v*",
    ("P", "P"): "P", ("Q", "Q"): "Q",
}


@dataclass(frozen=True, eq=False)
class TraceTableAlgebra(AlgebraModel):
    """Unital *-algebra generated by one homogeneous partial isometry ``v``.

    Only products fixed by the partial-isometry relations are defined;
    anything else (``v v``, ``P Q`` ...) is not determined by trace data and
    raises.  ``tau(1)`` is likewise undefined.
    """

    degree: int
    range_table: SpectralTraceTable
    name: str = "table"
    assumptions: tuple = ()

    def __post_init__(self):
        if self.degree == 0:
            raise InputError("abstract isometry: degree must be nonzero")

    @property
    def model_id(self) -> str:
        return f"{self.name}(deg={self.degree})"

    @property
    def beta(self) -> float:
        return self.range_table.beta

    @property
    def source_table(self) -> SpectralTraceTable:
        """``Tr_phi(v*v Phi_n) = Tr_phi(vv* Phi_{n+k})``."""
        return self.range_table.shift(self.degree)

    def kms_context(self) -> KmsContext:
        return KmsContext(self.beta, self.range_table.is_full(), None,
                          self.range_table.exp_beta, self.model_id)

    # generators -------------------------------------------------------
    def symbol(self, s: str, c=1.0) -> GradedElement:
        if s not in SYMBOLS:
            raise InputError(f"unknown symbol {s!r}; expected one of {SYMBOLS}")
        return self.element({_DEGREE_SIGN[s] * self.degree: {s: c}}, origin=s)

    @property
    def v(self) -> GradedElement:
        return self.symbol("v")

    # payload hooks ------------------------------------------------------
    def p_zero(self):
        return {}

    def p_unit(self):
        return {"1": 1.0}

    def p_add(self, x, y):
        out = dict(x)
        for s, c in y.items():
            out[s] = out.get(s, 0) + c
        return {s: c for s, c in out.items() if c != 0}

    def p_scale(self, x, c):
        return {s: c * d for s, d in x.items() if c * d != 0}

    def p_mul(self, x, y):
        out: dict[str, Any] = {}
        for s, c in x.items():
            for t, d in y.items():
                if s == "1":
                    u = t
                elif t == "1":
                    u = s
                elif (s, t) in _PRODUCTS:
                    u = _PRODUCTS[(s, t)]
                else:
                    raise InputError(f"product {s}.{t} is not determined by trace data")
                out[u] = out.get(u, 0) + c * d
        return {s: c for s, c in out.items() if c != 0}

    def p_adjoint(self, x):
        swap = {"v": "v*", "v*": "v"}
        return {swap.get(s, s): complex(c).conjugate() if isinstance(c, complex) else c
                for s, c in x.items()}

    def p_norm(self, x) -> float:
        return float(sum(abs(c) for c in x.values()))

    def p_tau(self, x):
        total = 0.0
        for s, c in x.items():
            if s == "P":
                total += c * self.range_table.tau
            elif s == "Q":
                total += c * self.source_table.tau
            elif s == "1":
                raise InputError("tau(1) is not available for an abstract isometry table")
            else:
                raise InputError(f"tau needs a degree-0 payload, got {s!r}")
        return total

    def p_trace_table(self, x, ctx):
        table = None
        for s, c in x.items():
            if s == "P":
                part = self.range_table.scaled(c)
            elif s == "Q":
                part = self.source_table.scaled(c)
            elif s == "1":
                raise InputError("the spectral-trace table of 1 is not available")
            else:
                raise InputError(f"spectral traces need a degree-0 payload, got {s!r}")
            table = part if table is None else table + part
        if table is None:
            return SpectralTraceTable.zero_table(self.beta, self.range_table.exp_beta)
        return table


@dataclass(frozen=True)
class AbstractIsometry:
    """A homogeneous partial isometry known only through its trace tables."""

    degree: int
    range_table: SpectralTraceTable
    algebra: TraceTableAlgebra = field(init=False)
    label: str = "table"
    extrapolation_dependent: bool = False
    closed_form: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "algebra", TraceTableAlgebra(self.degree, self.range_table, self.label))

    @property
    def source_table(self) -> SpectralTraceTable:
        return self.algebra.source_table

    @property
    def element(self) -> GradedElement:
        return self.algebra.v

    def context(self) -> KmsContext:
        return self.algebra.kms_context()

    def shift_consistency(self, window: range) -> float:
        """Max ``|Tr(v*v Phi_n) - Tr(vv* Phi_{n+k})|`` over ``window``."""
        src, rng = self.source_table, self.range_table
        return max((abs(src(n) - rng(n + self.degree)) for n in window), default=0.0)


def suq2_table(q: float, k: int) -> AbstractIsometry:
    """The isometry ``T_k*`` of quantum SU(2): degree ``-k``, ``Tr(vv* Phi_j) = q^{2(|j|+1)}``.

    The formula is used for every integer j, which the residue route needs;
    the returned object is flagged as extrapolation dependent.
    """
    if not 0 < q < 1:
        raise InputError("suq2_table: need 0 < q < 1")
    if int(k) != k or k < 1:
        raise InputError("suq2_table: need an integer k >= 1")
    k = int(k)
    q2 = q * q
    beta = -math.log(q2)
    vals = tuple(q2 ** (abs(j) + 1) for j in range(-k, k + 1))
    seq = BoundedSequence(-k, vals, left=((vals[0], q2),), right=((vals[-1], q2),))
    note = "q^(2(|j|+1)) extrapolated to all j"
    table = SpectralTraceTable(beta, seq, 1.0 / q2, True, "geometric", -k, (note,))
    return AbstractIsometry(-k, table, label=f"suq2(q={q:g},k={k})",
                            extrapolation_dependent=True, closed_form=k * q2)


def isometry_from_table(table: SpectralTraceTable, degree: int | None = None) -> AbstractIsometry:
    degree = table.degree if degree is None else degree
    if degree is None or degree == 0:
        raise InputError("table document needs a nonzero 'degree' for spectral flow")
    return AbstractIsometry(int(degree), table)
