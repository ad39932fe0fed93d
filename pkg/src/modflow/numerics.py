"""Numerical kernels for the residue route.

Everything here works on sequences ``s_n`` indexed by all of Z that are
finite on a window and exponential beyond it.  Such sequences cover every
spectral-trace table the models produce, and their tails can be summed in
closed form, which is what makes evaluation close to the pole at r = 1/2
possible.

The three series used downstream are

* ``zeta_series``:  sum_n s_n (1 + n^2)^(-r)
* ``eta_series``:   sum_n s_n [g(n + m) - g(n)],  g(x) = sign(x) G(|x|, r)
* ``theta_series``: -sum_n s_n g(n)                  (only for r > 1)

with ``G(x, r) = int_x^inf (1 + t^2)^(-r) dt``.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Number
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import InputError, NumericalFailure

#: ratios closer than this to 1 are treated as exactly 1 (constant tails)
RATIO_SNAP = 1e-12
#: hard cap on explicitly summed tail terms
MAX_TERMS = 1_000_000
#: below this index the series are summed term by term
EXPLICIT_CUTOFF = 32
#: switch point from quadrature to the asymptotic expansion of G
_G_SWITCH = 2.0

_GL64 = np.polynomial.legendre.leggauss(64)
_GL32 = np.polynomial.legendre.leggauss(32)
_GL20 = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class SeriesValue:
    """A series value together with a bound on the truncation error."""

    value: complex | float
    error: float

    def __add__(self, other: "SeriesValue") -> "SeriesValue":
        return SeriesValue(self.value + other.value, self.error + other.error)

    def __float__(self) -> float:
        return float(self.value.real if isinstance(self.value, complex) else self.value)


@dataclass(frozen=True)
class Estimate:
    """Extrapolated value with the last useful extrapolation increment."""

    value: float
    error: float
    table: tuple = ()


def thread_count() -> int:
    raw = os.environ.get("MODFLOW_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

def c_r(r):
    """``sqrt(pi) Gamma(r - 1/2) / Gamma(r)``, the integral of (1+x^2)^-r over R.

    Accepts complex ``r`` with ``Re r > 1/2``.  Evaluated through log-Gamma so
    large ``|r|`` does not overflow.
    """
    z = complex(r)
    if abs(z - 0.5) < 1e-8:
        raise InputError(f"c_r: r={r!r} is within 1e-8 of the pole at 1/2")
    if z.real <= 0.5:
        raise InputError(f"c_r: requires Re(r) > 1/2, got {r!r}")
    val = math.sqrt(math.pi) * np.exp(special.loggamma(z - 0.5) - special.loggamma(z))
    if not isinstance(r, complex):
        return float(val.real)
    return complex(val)


def _binomial_series(r: float, term: Callable[[int], float], max_terms: int = 80) -> float:
    """Sum ``sum_k binom(-r, k) * term(k)`` where terms shrink like base^-2k."""
    total = []
    coeff = 1.0
    for k in range(max_terms):
        t = coeff * term(k)
        total.append(t)
        if abs(t) <= 1e-18 * abs(math.fsum(total)) and k > 1:
            break
        coeff *= (-r - k) / (k + 1)
    return math.fsum(total)


def _integrand(t, r):
    return (1.0 + t * t) ** (-r)


def _gl(a, b, r, rule=_GL64):
    nodes, weights = rule
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    t = mid + half * nodes
    return half * math.fsum(weights * _integrand(t, r))


@lru_cache(maxsize=65536)
def _tail_integral(x: float, r: float) -> float:
    if x >= _G_SWITCH:
        # (1+t^2)^-r = sum_k binom(-r,k) t^(-2r-2k), integrated term by term
        return _binomial_series(
            r, lambda k: x ** (1.0 - 2.0 * r - 2.0 * k) / (2.0 * r + 2.0 * k - 1.0))
    return _gl(x, _G_SWITCH, r) + _tail_integral(_G_SWITCH, r)


def eta_tail_integral(x: float, r: float) -> float:
    """``G(x, r) = int_x^inf (1 + t^2)^(-r) dt`` for ``x >= 0`` and ``r > 1/2``.

    Gauss-Legendre on ``[x, 2]`` plus the termwise-integrated binomial
    expansion beyond 2.  Absolute error is at the 1e-15 level for
    ``1/2 < r <= 10``; the value itself grows like ``1/(2r - 1)``.
    """
    r = float(r)
    x = float(x)
    if x < 0:
        raise InputError("eta_tail_integral: x must be nonnegative")
    if r <= 0.5:
        raise InputError("eta_tail_integral: requires r > 1/2")
    if r - 0.5 < 1e-6:
        warnings.warn(f"eta_tail_integral: r={r} is within 1e-6 of 1/2; "
                      "the result is of order 1/(2r-1)", RuntimeWarning, stacklevel=2)
    return _tail_integral(x, r)


def quadrature_order_check(r: float = 0.75) -> float:
    """Difference between the 64- and 32-point rules on [0, 2] (doubling check)."""
    return abs(_gl(0.0, _G_SWITCH, r, _GL64) - _gl(0.0, _G_SWITCH, r, _GL32))


def _g(x: int, r: float) -> float:
    if x == 0:
        return 0.0
    return math.copysign(_tail_integral(float(abs(x)), r), x)


@lru_cache(maxsize=4096)
def _unit_integrals(r: float, start: int, count: int) -> np.ndarray:
    """``int_n^{n+1} (1+t^2)^-r dt`` for n = start, ..., start + count - 1."""
    nodes, weights = _GL20
    n = np.arange(start, start + count, dtype=float)[:, None]
    t = n + 0.5 + 0.5 * nodes[None, :]
    vals = 0.5 * (_integrand(t, r) * weights[None, :]).sum(axis=1)
    vals.setflags(write=False)
    return vals


def _segment(j: np.ndarray, m: int, r: float) -> np.ndarray:
    """``int_j^{j+m} (1+t^2)^-r dt`` (signed) for integer arrays ``j``."""
    lo = np.minimum(j, j + m)
    start = int(lo.min())
    count = int(lo.max() - start) + abs(m)
    units = _unit_integrals(r, start, count)
    cums = np.concatenate(([0.0], np.cumsum(units)))
    idx = lo - start
    out = cums[idx + abs(m)] - cums[idx]
    return out if m > 0 else -out


def _weights(j: np.ndarray, m: int, r: float) -> np.ndarray:
    """``g(j + m) - g(j)`` for an integer array ``j``."""
    j = np.asarray(j, dtype=np.int64)
    out = np.empty(j.shape, dtype=float)
    same = ((j > 0) & (j + m > 0)) | ((j < 0) & (j + m < 0))
    if same.any():
        out[same] = -_segment(j[same], m, r)
    for i in np.flatnonzero(~same):
        out[i] = _g(int(j[i] + m), r) - _g(int(j[i]), r)
    return out


# ---------------------------------------------------------------------------
# Sequences with exponential tails
# ---------------------------------------------------------------------------

def _snap(rho):
    if isinstance(rho, Fraction):
        return rho
    if abs(rho - 1.0) <= RATIO_SNAP:
        return 1.0
    return rho


@dataclass(frozen=True)
class BoundedSequence:
    """``s_n`` on Z: explicit values on ``[lo, hi]``, exponential tails outside.

    ``right`` holds pairs ``(c, rho)`` with ``s_n = sum c * rho**(n - hi)`` for
    ``n > hi``; ``left`` likewise with ``rho**(lo - n)`` for ``n < lo``.
    """

    lo: int
    values: tuple
    left: tuple = ()
    right: tuple = ()

    def __post_init__(self):
        if not self.values:
            raise InputError("BoundedSequence needs at least one explicit value")
        object.__setattr__(self, "left", tuple((c, _snap(p)) for c, p in self.left if c != 0))
        object.__setattr__(self, "right", tuple((c, _snap(p)) for c, p in self.right if c != 0))

    @classmethod
    def constant(cls, c) -> "BoundedSequence":
        return cls(0, (c,), ((c, 1),), ((c, 1),))

    @classmethod
    def zero(cls) -> "BoundedSequence":
        return cls(0, (0,))

    @property
    def hi(self) -> int:
        return self.lo + len(self.values) - 1

    def __call__(self, n: int):
        if n < self.lo:
            return sum(c * p ** (self.lo - n) for c, p in self.left)
        if n > self.hi:
            return sum(c * p ** (n - self.hi) for c, p in self.right)
        return self.values[n - self.lo]

    def widened(self, lo: int, hi: int) -> "BoundedSequence":
        lo, hi = min(lo, self.lo), max(hi, self.hi)
        vals = tuple(self(n) for n in range(lo, hi + 1))
        left = tuple((c * p ** (self.lo - lo), p) for c, p in self.left)
        right = tuple((c * p ** (hi - self.hi), p) for c, p in self.right)
        return BoundedSequence(lo, vals, left, right)

    def __add__(self, other: "BoundedSequence") -> "BoundedSequence":
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        a, b = self.widened(lo, hi), other.widened(lo, hi)
        vals = tuple(x + y for x, y in zip(a.values, b.values))
        return BoundedSequence(lo, vals, a.left + b.left, a.right + b.right)

    def scaled(self, k) -> "BoundedSequence":
        return BoundedSequence(self.lo, tuple(k * v for v in self.values),
                               tuple((k * c, p) for c, p in self.left),
                               tuple((k * c, p) for c, p in self.right))

    __rmul__ = scaled
    __mul__ = scaled

    def is_complex(self) -> bool:
        items = list(self.values) + [c for c, _ in self.left + self.right]
        return any(isinstance(v, complex) and v.imag != 0 for v in items)

    def part(self, which: str) -> "BoundedSequence":
        take = (lambda v: complex(v).real) if which == "real" else (lambda v: complex(v).imag)
        return BoundedSequence(self.lo, tuple(take(v) for v in self.values),
                               tuple((take(c), float(p)) for c, p in self.left),
                               tuple((take(c), float(p)) for c, p in self.right))

    def check_bounded(self) -> None:
        for c, p in self.left + self.right:
            if abs(p) > 1:
                raise InputError(f"unbounded tail (ratio {float(p):.6g} > 1); "
                                 "series summation refused")

    def constant_tails(self) -> tuple:
        """Sum of the ratio-one tail coefficients on the left and right."""
        cl = sum(c for c, p in self.left if p == 1)
        cr = sum(c for c, p in self.right if p == 1)
        return cl, cr


def _geometric_count(c, rho) -> int:
    rho = abs(float(rho))
    if rho == 0.0:
        return 0
    need = math.log(1e-20) / math.log(rho)
    return int(min(MAX_TERMS, max(1, math.ceil(need))))


def _as_float(x) -> float:
    # complex values reaching here have zero imaginary part (see _dispatch_complex)
    return x.real if isinstance(x, complex) else float(x)


def _dispatch_complex(fn):
    def wrapper(seq: BoundedSequence, *args):
        seq.check_bounded()
        if seq.is_complex():
            re = fn(seq.part("real"), *args)
            im = fn(seq.part("imag"), *args)
            return SeriesValue(complex(re.value, im.value), math.hypot(re.error, im.error))
        return fn(seq, *args)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@lru_cache(maxsize=65536)
def _hurwitz_tail(n0: int, r: float) -> tuple:
    """``sum_{n >= n0} (1+n^2)^-r`` for ``n0 >= EXPLICIT_CUTOFF`` with error."""
    terms = []
    coeff = 1.0
    for k in range(60):
        t = coeff * special.zeta(2.0 * r + 2.0 * k, n0)
        terms.append(t)
        if abs(t) < 1e-19 * abs(terms[0]):
            break
        coeff *= (-r - k) / (k + 1)
    return math.fsum(terms), abs(terms[-1])


def _tail_sum(start: int, r: float) -> tuple:
    """``sum_{n >= start} (1+n^2)^-r`` for any integer start."""
    if start >= EXPLICIT_CUTOFF:
        return _hurwitz_tail(start, r)
    n = np.arange(start, EXPLICIT_CUTOFF, dtype=float)
    head = math.fsum(_integrand(n, r))
    tail, err = _hurwitz_tail(EXPLICIT_CUTOFF, r)
    return head + tail, err


@_dispatch_complex
def zeta_series(seq: BoundedSequence, r: float) -> SeriesValue:
    """``sum_{n in Z} s_n (1+n^2)^(-r)`` for a bounded sequence and r > 1/2.

    Ratio-one tails are summed with the Hurwitz zeta expansion of
    ``(1+n^2)^-r = sum_k binom(-r,k) n^(-2r-2k)``; geometric tails are summed
    until the remainder falls below 1e-20 of the tail's scale.
    """
    r = float(r)
    if r <= 0.5:
        raise InputError("zeta_series: requires r > 1/2")
    n = np.arange(seq.lo, seq.hi + 1, dtype=float)
    vals = np.array([_as_float(v) for v in seq.values])
    parts = list(vals * _integrand(n, r))
    error = 0.0
    for side, tails in (("right", seq.right), ("left", seq.left)):
        edge = seq.hi if side == "right" else seq.lo
        for c, p in tails:
            c = _as_float(c)
            if p == 1:
                start = edge + 1 if side == "right" else 1 - edge
                s, e = _tail_sum(start, r)
                parts.append(c * s)
                error += abs(c) * e
                continue
            p = _as_float(p)
            count = _geometric_count(c, p)
            if count == 0:
                continue
            i = np.arange(1, count + 1, dtype=float)
            idx = edge + i if side == "right" else edge - i
            parts.extend(c * p ** i * _integrand(idx, r))
            error += abs(c) * abs(p) ** (count + 1) / (1 - abs(p))
    return SeriesValue(math.fsum(parts), error)


@_dispatch_complex
def eta_series(seq: BoundedSequence, m: int, r: float) -> SeriesValue:
    """``sum_j s_j [g(j+m) - g(j)]`` with ``g(x) = sign(x) G(|x|, r)``.

    This is the absolutely convergent rearrangement of the eta integral
    ``(1/2) int_1^inf phi_D((sigma(a1) a0 - a0 a1) D (1+sD^2)^-r) s^-1/2 ds``
    for a1 of degree ``m``; it is analytic for r > 1/2.  Ratio-one tails
    telescope to finitely many values of ``g``.
    """
    r = float(r)
    if r <= 0.5:
        raise InputError("eta_series: requires r > 1/2")
    if m == 0:
        return SeriesValue(0.0, 0.0)
    js = np.arange(seq.lo, seq.hi + 1, dtype=np.int64)
    vals = np.array([_as_float(v) for v in seq.values])
    parts = list(vals * _weights(js, m, r))
    error = 0.0
    mu = abs(m)
    for side, tails in (("right", seq.right), ("left", seq.left)):
        edge = seq.hi if side == "right" else seq.lo
        for c, p in tails:
            c = _as_float(c)
            if p == 1:
                if side == "right":
                    if m > 0:
                        g_sum = -math.fsum(_g(edge + l, r) for l in range(1, m + 1))
                    else:
                        g_sum = math.fsum(_g(edge - l, r) for l in range(mu))
                else:
                    if m > 0:
                        g_sum = math.fsum(_g(edge + l, r) for l in range(m))
                    else:
                        g_sum = -math.fsum(_g(edge - l, r) for l in range(1, mu + 1))
                parts.append(c * g_sum)
                continue
            p = _as_float(p)
            count = _geometric_count(c, p)
            if count == 0:
                continue
            i = np.arange(1, count + 1, dtype=np.int64)
            idx = edge + i if side == "right" else edge - i
            parts.extend(c * p ** i.astype(float) * _weights(idx, m, r))
            error += abs(c) * mu * abs(p) ** (count + 1) / (1 - abs(p))
    return SeriesValue(math.fsum(parts), error)


@lru_cache(maxsize=4096)
def _g_tail_sum(start: int, r: float) -> float:
    """``sum_{n >= start} G(n, r)`` for r > 1 (start >= 1)."""
    head = []
    n0 = max(start, EXPLICIT_CUTOFF)
    for n in range(start, n0):
        head.append(_tail_integral(float(n), r))
    tail = _binomial_series(
        r, lambda k: special.zeta(2.0 * r + 2.0 * k - 1.0, n0) / (2.0 * r + 2.0 * k - 1.0))
    return math.fsum(head) + tail


@_dispatch_complex
def theta_series(seq: BoundedSequence, r: float) -> SeriesValue:
    """``-sum_n s_n g(n)``; converges only for r > 1 when tails are constant."""
    r = float(r)
    if r <= 1.0 and (seq.constant_tails() != (0, 0)):
        raise InputError("theta_series: constant tails need r > 1")
    if r <= 0.5:
        raise InputError("theta_series: requires r > 1/2")
    parts = [-_as_float(v) * _g(n, r) for n, v in zip(range(seq.lo, seq.hi + 1), seq.values)]
    for side, tails in (("right", seq.right), ("left", seq.left)):
        edge = seq.hi if side == "right" else seq.lo
        sgn = 1.0 if side == "right" else -1.0
        for c, p in tails:
            c = _as_float(c)
            if p == 1:
                start = edge + 1 if side == "right" else 1 - edge
                # g is odd: the terms with index in [start, 0] cancel in pairs
                parts.append(-c * sgn * _g_tail_sum(max(start, 1 - start), r))
                continue
            p = _as_float(p)
            count = _geometric_count(c, p)
            for i in range(1, count + 1):
                idx = edge + i if side == "right" else edge - i
                parts.append(-c * p ** i * _g(idx, r))
    return SeriesValue(math.fsum(parts), 0.0)


def series_residue(seq: BoundedSequence) -> float:
    """Exact residue at r = 1/2 of ``zeta_series(seq, r)``.

    Only ratio-one tails produce a pole; each side contributes half its
    constant because ``sum_{n>0} (1+n^2)^-r`` has residue 1/2.
    """
    cl, cr = seq.constant_tails()
    return 0.5 * (_as_float(cl) + _as_float(cr))


def eta_residue(seq: BoundedSequence, m: int) -> float:
    """Exact residue at r = 1/2 of ``eta_series(seq, m, r)``.

    ``g(x) = sign(x) C_r / 2 - int_0^x (1+t^2)^-r dt``; the first piece gives a
    finite sum over j between -m and 0, the second piece only picks up the
    constant tails.
    """
    if m == 0:
        return 0.0
    total = []
    for j in range(min(0, -m), max(0, -m) + 1):
        jump = (np.sign(j + m) - np.sign(j)) / 2.0
        if jump:
            total.append(_as_float(seq(j)) * jump)
    cl, cr = seq.constant_tails()
    total.append(-m * (_as_float(cl) + _as_float(cr)) / 2.0)
    return math.fsum(total)


# ---------------------------------------------------------------------------
# Extrapolation
# ---------------------------------------------------------------------------

def richardson(hs: Sequence[float], values: Sequence, *, strict: bool = True) -> Estimate:
    """Extrapolate ``values[j] = A(hs[j])`` to h -> 0 for geometric ``hs``.

    Builds the full Neville tableau assuming an expansion in integer powers of
    h; the answer is the diagonal entry with the smallest increment.
    """
    if len(hs) != len(values) or len(hs) < 3:
        raise InputError("richardson needs at least three matching nodes")
    ratios = [hs[j - 1] / hs[j] for j in range(1, len(hs))]
    t = ratios[0]
    if t <= 1 or any(abs(x - t) > 1e-9 * t for x in ratios):
        raise InputError("richardson: nodes must decrease geometrically")
    rows = [[values[0]]]
    for j in range(1, len(values)):
        row = [values[j]]
        for k in range(1, j + 1):
            row.append(row[k - 1] + (row[k - 1] - rows[j - 1][k - 1]) / (t ** k - 1))
        rows.append(row)
    diag = [rows[j][j] for j in range(len(rows))]
    incs = [abs(diag[j] - diag[j - 1]) for j in range(1, len(diag))]
    best = min(range(len(incs)), key=lambda i: incs[i])
    value = diag[best + 1]
    scale = max(1.0, abs(value))
    growing = all(incs[i + 1] > incs[i] for i in range(len(incs) - 1))
    if strict and growing and incs[0] > 1e-12 * scale:
        raise NumericalFailure("extrapolation increments grow monotonically; "
                               "the table does not converge")
    return Estimate(value, incs[best], tuple(diag))


def default_offsets() -> list[float]:
    return [0.1 * 2.0 ** (-j) for j in range(9)]


def residue_at_half(F: Callable[[float], complex], offsets: Sequence[float] | None = None,
                    threads: int | None = None) -> Estimate:
    """Residue at r = 1/2 of a function with (at most) a simple pole there.

    Richardson extrapolation of ``delta * F(1/2 + delta)`` to delta -> 0 on
    geometric offsets (default ``0.1 * 2**-j``, j = 0..8).
    """
    offsets = list(offsets) if offsets is not None else default_offsets()
    if any(d <= 0 for d in offsets):
        raise InputError("residue_at_half: offsets must be positive")
    threads = threads or thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fvals = list(pool.map(lambda d: F(0.5 + d), offsets))
    else:
        fvals = [F(0.5 + d) for d in offsets]
    g = [d * f for d, f in zip(offsets, fvals)]
    if any(isinstance(x, complex) for x in g):
        re = richardson(offsets, [complex(x).real for x in g])
        im = richardson(offsets, [complex(x).imag for x in g])
        return Estimate(complex(re.value, im.value), math.hypot(re.error, im.error))
    return richardson(offsets, [float(x) for x in g])


def is_number(x) -> bool:
    return isinstance(x, Number)
