"""Laurent polynomials in one variable chi with finitely many nonzero coefficients."""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping


@dataclass(frozen=True, eq=False)
class LaurentPolynomial:
    coeffs: Mapping[int, object]

    def __init__(self, coeffs: Mapping[int, object] | None = None):
        kept = {int(n): c for n, c in (coeffs or {}).items() if c != 0}
        object.__setattr__(self, "coeffs", MappingProxyType(dict(sorted(kept.items()))))

    @classmethod
    def monomial(cls, n: int, c=1) -> "LaurentPolynomial":
        return cls({n: c})

    def __add__(self, other: "LaurentPolynomial") -> "LaurentPolynomial":
        out = dict(self.coeffs)
        for n, c in other.coeffs.items():
            out[n] = out.get(n, 0) + c
        return LaurentPolynomial(out)

    def __neg__(self) -> "LaurentPolynomial":
        return LaurentPolynomial({n: -c for n, c in self.coeffs.items()})

    def __sub__(self, other: "LaurentPolynomial") -> "LaurentPolynomial":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, LaurentPolynomial):
            out: dict[int, object] = {}
            for n, c in self.coeffs.items():
                for m, d in other.coeffs.items():
                    out[n + m] = out.get(n + m, 0) + c * d
            return LaurentPolynomial(out)
        return LaurentPolynomial({n: c * other for n, c in self.coeffs.items()})

    __rmul__ = __mul__

    def shift(self, j: int) -> "LaurentPolynomial":
        """Multiply by ``chi^j``."""
        return LaurentPolynomial({n + j: c for n, c in self.coeffs.items()})

    def evaluate(self, x):
        if not self.coeffs:
            return 0
        return sum(c * x ** n for n, c in self.coeffs.items())

    __call__ = evaluate

    def max_coeff_deviation(self, other: "LaurentPolynomial") -> float:
        diff = self - other
        return max((abs(c) for c in diff.coeffs.values()), default=0.0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LaurentPolynomial):
            return NotImplemented
        return dict(self.coeffs) == dict(other.coeffs)

    def __hash__(self) -> int:
        return hash(tuple(self.coeffs.items()))

    def is_zero(self) -> bool:
        return not self.coeffs

    def __repr__(self) -> str:
        if not self.coeffs:
            return "0"
        return " + ".join(f"({c})*chi^{n}" for n, c in self.coeffs.items())
