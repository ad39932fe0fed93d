import json
import math

import pytest

from modflow import core
from modflow.errors import InputError, TraceInequalityError
from modflow.tracetable import (SpectralTraceTable, TraceTableAlgebra, isometry_from_table,
                                load_table, suq2_table, trace_audit)


def _doc(**over):
    doc = {"beta": math.log(3), "degree": 1,
           "entries": {"-1": 0.25 / 3, "0": 0.25, "1": 0.75},
           "tail": {"kind": "full"}}
    doc.update(over)
    return doc


def _suq2_doc(q=0.5, k=2):
    q2 = q * q
    return {"beta": -math.log(q2), "degree": -k,
            "entries": {str(j): q2 ** (abs(j) + 1) for j in range(-k, k + 1)},
            "tail": {"kind": "geometric", "ratio": q2, "anchor": k}}


class TestSuq2:
    @pytest.mark.parametrize("j,expected", [(-1, 0.0625), (-3, 0.00390625), (0, 0.25), (5, 0.25 ** 6)])
    def test_values(self, j, expected):
        iso = suq2_table(0.5, 2)
        assert iso.range_table(j) == pytest.approx(expected, rel=1e-15)

    def test_metadata(self):
        iso = suq2_table(0.5, 3)
        assert iso.degree == -3
        assert iso.range_table.beta == pytest.approx(-math.log(0.25))
        assert iso.extrapolation_dependent
        assert iso.range_table.assumptions

    @pytest.mark.parametrize("q,k", [(0.5, 1), (0.3, 4), (0.9, 2)])
    def test_shift_consistency(self, q, k):
        iso = suq2_table(q, k)
        assert iso.shift_consistency(range(-3 * k, 3 * k + 1)) == 0.0
        assert iso.source_table(0) == pytest.approx(q ** (2 * (k + 1)))

    @pytest.mark.parametrize("q,k", [(0.0, 1), (1.0, 1), (0.5, 0), (0.5, 1.5)])
    def test_bad_args(self, q, k):
        with pytest.raises(InputError):
            suq2_table(q, k)

    def test_inequality_holds(self):
        suq2_table(0.7, 3).range_table.check_inequality(extra=20)


class TestLoad:
    def test_full(self):
        t = load_table(_doc())
        assert t.kind == "full" and t.is_full()
        assert t(5) == pytest.approx(0.25 * 3 ** 5)
        assert t(-4) == pytest.approx(0.25 * 3 ** -4)

    def test_json_text_and_path(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text(json.dumps(_doc()))
        assert load_table(str(p))(1) == pytest.approx(0.75)
        assert load_table(p)(1) == pytest.approx(0.75)
        assert load_table(json.dumps(_doc()))(1) == pytest.approx(0.75)

    def test_missing_zero(self):
        with pytest.raises(InputError, match="n = 0"):
            load_table(_doc(entries={"1": 0.5}))

    def test_suq2_geometric_matches_builtin(self):
        t = load_table(_suq2_doc(0.5, 2))
        ref = suq2_table(0.5, 2).range_table
        for n in range(-8, 9):
            assert t(n) == pytest.approx(ref(n), rel=1e-14)

    def test_geometric_without_anchor(self):
        doc = {"beta": math.log(4), "entries": {"0": 0.5}, "tail": {"kind": "geometric", "ratio": 0.25}}
        t = load_table(doc)
        assert t(3) == pytest.approx(0.5 * 0.25 ** 3)
        assert t(-2) == pytest.approx(0.5 * 0.25 ** 2)

    def test_geometric_violating_bound(self):
        # a decaying left tail faster than e^{n beta} is allowed; slower is not
        doc = {"beta": 1.0, "entries": {"0": 0.5}, "tail": {"kind": "geometric", "ratio": 0.5}}
        with pytest.raises(InputError, match="inequality"):
            load_table(doc)

    @pytest.mark.parametrize("doc", [
        {"entries": {"0": 1}, "tail": {"kind": "zero"}},
        {"beta": 1.0, "entries": {"0": -1}, "tail": {"kind": "zero"}},
        {"beta": 1.0, "entries": {"x": 1}, "tail": {"kind": "zero"}},
        {"beta": 1.0, "entries": {"0": 1}, "tail": {"kind": "weird"}},
        {"beta": 1.0, "entries": {"0": 1}, "tail": {"kind": "geometric"}},
    ])
    def test_schema_errors(self, doc):
        with pytest.raises(InputError):
            load_table(doc)

    def test_not_json(self):
        with pytest.raises(InputError):
            load_table("{not json")

    def test_non_contiguous(self):
        with pytest.raises(InputError, match="contiguous"):
            load_table(_doc(entries={"0": 0.25, "2": 0.1}))

    def test_inequality_violation(self):
        with pytest.raises(InputError, match="inequality"):
            load_table(_doc(entries={"0": 0.25, "1": 0.9}))

    def test_unbounded_tail_refused(self):
        with pytest.raises(InputError):
            load_table({"beta": 0.1, "entries": {"0": 1.0}, "tail": {"kind": "geometric", "ratio": 2.0}})

    def test_zero_tail(self):
        t = load_table({"beta": 1.0, "degree": 1, "entries": {"0": 0.5, "1": 0.2}, "tail": {"kind": "zero"}})
        assert t(7) == 0 and t(-1) == 0


class TestTableObject:
    def test_audit_counts_checks(self):
        t = SpectralTraceTable.full(1.0, 0.5)
        with trace_audit() as audit:
            t(2)
            t(-1)
        assert audit.checks == 2 and not audit.violations
        assert audit.worst_ratio <= 1 + 1e-12

    def test_violation_raises_on_access(self):
        t = load_table({"beta": 1.0, "entries": {"0": 0.5}, "tail": {"kind": "zero"}})
        bad = t.shift(-1)  # n -> T(n - 1): zero at 0, 0.5 at 1
        with trace_audit() as audit:
            with pytest.raises(TraceInequalityError):
                bad(1)
        assert audit.violations == 1

    def test_scaled_negative_not_checked(self):
        t = SpectralTraceTable.full(1.0, 0.5).scaled(-1)
        assert not t.positive and t(2) == pytest.approx(-0.5 * math.e ** 2)

    @pytest.mark.parametrize("doc", [_doc(), _suq2_doc(0.3, 3),
                                     {"beta": 1.0, "degree": 1, "entries": {"0": 0.5, "1": 0.2},
                                      "tail": {"kind": "zero"}}])
    def test_document_round_trip(self, doc):
        t = load_table(doc)
        back = load_table(t.to_document())
        for n in range(-6, 7):
            assert back(n) == pytest.approx(t(n), rel=1e-14)

    def test_phi_d_sequence_constant_for_full(self):
        s = SpectralTraceTable.full(math.log(2), 0.5).phi_d_sequence()
        for n in (-5, 0, 7):
            assert s(n) == pytest.approx(0.5)

    def test_suq2_not_full(self):
        assert not suq2_table(0.5, 1).range_table.is_full()
        assert SpectralTraceTable.full(1.0, 0.3).is_full()


class TestAlgebra:
    def test_partial_isometry_products(self):
        iso = suq2_table(0.5, 1)
        v = iso.element
        assert core.classify_modular(v).is_modular
        assert (v * v.H * v).equals(v)

    def test_undetermined_product(self):
        v = suq2_table(0.5, 1).element
        with pytest.raises(InputError):
            v * v

    def test_tau_of_unit_undefined(self):
        alg = suq2_table(0.5, 1).algebra
        with pytest.raises(InputError):
            core.phi(alg.one())

    def test_tau_of_projections(self):
        iso = suq2_table(0.5, 1)
        alg = iso.algebra
        assert core.phi(alg.symbol("P")) == pytest.approx(0.25)
        assert core.phi(alg.symbol("Q")) == pytest.approx(0.25 ** 2)

    def test_isometry_from_table_needs_degree(self):
        t = load_table({"beta": 1.0, "entries": {"0": 0.5}, "tail": {"kind": "zero"}})
        with pytest.raises(InputError):
            isometry_from_table(t)
        assert isometry_from_table(t, 2).degree == 2

    def test_degree_zero_rejected(self):
        with pytest.raises(InputError):
            TraceTableAlgebra(0, SpectralTraceTable.full(1.0, 0.5))
