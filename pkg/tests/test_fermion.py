import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modflow import core
from modflow.errors import InputError, WordParseError
from modflow.fermion import (FermionAlgebra, closed_form_fermion, degree_decompose, jordan_wigner,
                             parse_fermion_word, powers_state, spectral_trace_fermion)
from modflow.sampling import random_fermion_monomial


class TestJordanWigner:
    def test_single_mode(self):
        a = jordan_wigner(1, FermionAlgebra(1, 0.25))
        assert np.array_equal(a, [[0, 0], [1, 0]])

    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_car(self, m):
        alg = FermionAlgebra(m, 0.3)
        ops = [jordan_wigner(j, alg) for j in range(1, m + 1)]
        eye = np.eye(alg.dim)
        for j, a in enumerate(ops):
            for k, b in enumerate(ops):
                assert np.abs(a @ b.conj().T + b.conj().T @ a - (j == k) * eye).max() < 1e-15
                assert np.abs(a @ b + b @ a).max() < 1e-15

    def test_read_only(self, car):
        with pytest.raises(ValueError):
            jordan_wigner(1, car)[0, 0] = 1

    @pytest.mark.parametrize("j", [0, 3, 1.5])
    def test_range(self, car, j):
        with pytest.raises(InputError):
            jordan_wigner(j, car)


class TestContext:
    def test_beta_relations(self):
        alg = FermionAlgebra(2, 0.25)
        assert alg.exp_beta == pytest.approx(3.0)
        assert alg.beta == pytest.approx(math.log(3))
        assert 1 + alg.exp_beta == pytest.approx(4.0)

    @pytest.mark.parametrize("lam", [0.0, 0.5, 0.7, -0.1])
    def test_lambda_range(self, lam):
        with pytest.raises(InputError):
            FermionAlgebra(2, lam)

    @pytest.mark.parametrize("m", [0, 11])
    def test_modes_range(self, m):
        with pytest.raises(InputError):
            FermionAlgebra(m, 0.25)


class TestPowersState:
    def test_unit(self, car):
        assert powers_state(car.one(), car) == pytest.approx(1.0)

    @pytest.mark.parametrize("text,expected", [("a1 a1*", 0.25), ("a1* a1", 0.75), ("a2 a2*", 0.25)])
    def test_examples(self, car, text, expected):
        assert powers_state(car.parse(text), car) == pytest.approx(expected, abs=1e-15)

    def test_matrix_input(self, car):
        assert powers_state(np.eye(4), car) == pytest.approx(1.0)

    def test_gauge_invariance(self, car):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = car.from_matrix(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
            for k in x.degrees:
                if k != 0:
                    assert powers_state(car.matrix(x.component(k)), car) == pytest.approx(0, abs=1e-14)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_kms_monomials(self, seed):
        alg = FermionAlgebra(3, 0.2)
        rng = np.random.default_rng(seed)
        a, b = (alg.parse(random_fermion_monomial(rng, alg)) for _ in range(2))
        assert core.kms_identity_residual(a, b, alg.kms_context()) <= 1e-12


class TestDegreeDecompose:
    def test_generator_degree(self, car):
        assert car.generator(2).degrees == (1,)

    def test_number_operator(self, car):
        assert car.parse("a1* a1").degrees == (0,)

    def test_self_adjoint_sum(self, car):
        a1 = car.generator(1)
        assert car.parse("a1").degrees == (1,)
        assert (a1 + a1.H).degrees == (-1, 1)

    @given(st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_reconstructs(self, seed):
        alg = FermionAlgebra(3, 0.3)
        x = np.random.default_rng(seed).normal(size=(8, 8))
        g = degree_decompose(alg, x)
        assert np.array_equal(alg.matrix(g), x)
        assert all(-3 <= k <= 3 for k in g.degrees)

    def test_shape_checked(self, car):
        with pytest.raises(InputError):
            degree_decompose(car, np.eye(3))


class TestSpectralTrace:
    @pytest.mark.parametrize("text,n,expected", [("a1 a1*", 0, 0.25), ("a1 a1*", 1, 0.75), ("", -1, 1 / 3)])
    def test_examples(self, car, text, n, expected):
        assert spectral_trace_fermion(car.parse(text), n, car) == pytest.approx(expected, rel=1e-14)

    def test_nonzero_degree(self, car):
        with pytest.raises(InputError):
            spectral_trace_fermion(car.generator(1), 0, car)

    def test_non_positive(self, car):
        with pytest.raises(InputError):
            spectral_trace_fermion(car.parse("a1 a1*").scaled(-1), 0, car)


class TestClosedForm:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_distinct(self, n):
        factors = [(j, False) for j in range(1, n + 1)]
        assert closed_form_fermion(factors, 0.25) == pytest.approx(-n * 0.25 ** n)

    def test_not_applicable(self):
        assert closed_form_fermion([(1, False), (1, False)], 0.25) is None
        assert closed_form_fermion([(1, True)], 0.25) is None
        assert closed_form_fermion([], 0.25) is None


class TestParser:
    def test_accepts(self):
        assert parse_fermion_word("a1 a2* a3") == [(1, False), (2, True), (3, False)]
        assert parse_fermion_word("") == []

    def test_matches_generators(self, car):
        x = car.parse("a1 a2*")
        assert x.equals(car.generator(1) * car.generator(2).H)

    @pytest.mark.parametrize("text,offset", [("a1 b2", 3), ("a1a2", 2), ("a0", 0), ("a1 a3", 3), ("é a1", 0)])
    def test_errors(self, text, offset):
        with pytest.raises(WordParseError) as info:
            parse_fermion_word(text, modes=2)
        assert info.value.offset == offset
