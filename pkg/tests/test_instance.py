import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resistor.geometry import OrthonormalBasis
from resistor.instance import (
    HardInstance,
    append_piece,
    from_json,
    params_deterministic,
    params_randomized,
    pessimal_point,
    randomized_dimension,
    shift_of,
    to_json,
    validate,
)
from resistor.streams import stream

from conftest import unit


class TestDeterministicParams:
    def test_schedule_t9_k2(self):
        p = params_deterministic(9, 2)
        assert p.gamma == pytest.approx(1.0 / 9.0, rel=1e-15)
        assert p.delta == pytest.approx(1.0 / 486.0, rel=1e-15)
        assert 2 * p.k * p.delta <= p.gamma / p.m
        assert p.m == 9 and p.d == 10
        assert p.norm_denom == pytest.approx(1.0 + (8.0 / 9.0) / 9.0, rel=1e-15)

    def test_schedule_t4_k1(self):
        p = params_deterministic(4, 1)
        assert p.gamma == pytest.approx(1.0 / 6.0, rel=1e-15)
        assert p.delta == pytest.approx(1.0 / 72.0, rel=1e-15)

    def test_uncertifiable_budget_errors(self):
        # the closed-form certificate cannot clear 1/(2 sqrt(T)) below T=3
        with pytest.raises(ValueError, match="floor"):
            params_deterministic(2, 1)
        with pytest.raises(ValueError, match="floor"):
            params_deterministic(1, 1)

    def test_dimension_override_upward_only(self):
        assert params_deterministic(4, 1, d=50).d == 50
        with pytest.raises(ValueError, match="d > T"):
            params_deterministic(4, 1, d=4)

    def test_constructors_validate_clean(self):
        for T in (4, 9, 16, 25):
            for k in (1, 2):
                assert validate(params_deterministic(T, k)) == []
        assert validate(params_randomized(4, 1, 0.2)) == []


class TestRandomizedParams:
    def test_schedule_t4(self):
        p = params_randomized(4, 1, 0.2)
        assert p.gamma == pytest.approx(1.0 / 6.0, rel=1e-15)
        assert p.delta == pytest.approx(1.0 / 160.0, rel=1e-15)
        assert p.norm_denom == 1.0

    def test_dimension_satisfies_union_bound(self):
        # smallest d with T exp(-(1/(20 T^1.5))^2 (d-T)/2) <= fail/T
        T, fail = 4, 0.2
        d = randomized_dimension(T, fail)
        rate = (1.0 / (20.0 * T**1.5)) ** 2 / 2.0
        assert T * math.exp(-rate * (d - T)) <= fail / T
        assert d - T - 1 < 800 * T**3 * math.log(T * T / fail) <= d - T
        p = params_randomized(T, 1, fail)
        assert p.d == d

    def test_schedule_t8_k2(self):
        p = params_randomized(8, 2, 0.5)
        assert p.delta == pytest.approx(1.0 / (40.0 * 8**1.5), rel=1e-12)
        assert p.delta == pytest.approx(0.001105, abs=1e-6)

    def test_fail_prob_domain(self):
        with pytest.raises(ValueError, match="fail_prob"):
            params_randomized(4, 1, 0.0)
        with pytest.raises(ValueError, match="fail_prob"):
            params_randomized(4, 1, 1.0)


class TestShiftOf:
    def test_values(self):
        p = params_deterministic(9, 2)
        assert shift_of(p, 1) == pytest.approx(8.0 / 81.0, rel=1e-12)
        assert shift_of(p, p.m) == 0.0

    def test_plain_arithmetic(self):
        p = dataclasses.replace(params_deterministic(4, 1), m=2, gamma=0.1)
        assert shift_of(p, 1) == pytest.approx(0.05, rel=1e-15)

    def test_out_of_range(self):
        p = params_deterministic(4, 1)
        for i in (0, 5):
            with pytest.raises(ValueError, match="out of range"):
                shift_of(p, i)

    def test_strictly_decreasing(self):
        p = params_deterministic(16, 1)
        shifts = [shift_of(p, i) for i in range(1, p.m + 1)]
        assert all(a > b for a, b in zip(shifts, shifts[1:]))


class TestAppendPiece:
    def test_degenerate_origin_gets_random_unit(self):
        p = params_deterministic(4, 1)
        inst = append_piece(HardInstance.empty(p), np.zeros(p.d), stream(3, "piece", 1))
        assert inst.num_pieces == 1
        a = inst.pieces[0].a
        assert abs(np.linalg.norm(a) - 1.0) < 1e-12
        # reproducible from the same stream
        again = append_piece(HardInstance.empty(p), np.zeros(p.d), stream(3, "piece", 1))
        np.testing.assert_array_equal(a, again.pieces[0].a)

    def test_unit_query_kept_as_direction(self):
        p = params_deterministic(4, 1)
        inst = append_piece(HardInstance.empty(p), unit(p.d, 0), stream(0, "piece"))
        np.testing.assert_allclose(inst.pieces[0].a, unit(p.d, 0), atol=1e-15)
        assert inst.pieces[0].shift == shift_of(p, 1)

    def test_gram_schmidt_against_existing(self):
        p = params_deterministic(4, 1)
        inst = append_piece(HardInstance.empty(p), unit(p.d, 0), stream(0, "piece"))
        x = (unit(p.d, 0) + unit(p.d, 1)) / np.sqrt(2)
        inst = append_piece(inst, x, stream(0, "piece", 2))
        np.testing.assert_allclose(inst.pieces[1].a, unit(p.d, 1), atol=1e-12)

    def test_budget_exhausted(self):
        p = params_deterministic(4, 1)
        inst = HardInstance.empty(p)
        for t in range(4):
            inst = append_piece(inst, np.zeros(p.d), stream(0, "piece", t))
        with pytest.raises(ValueError, match="budget"):
            append_piece(inst, np.zeros(p.d), stream(0, "piece", 5))

    def test_infeasible_query(self):
        p = params_deterministic(4, 1)
        with pytest.raises(ValueError, match="unit ball"):
            append_piece(HardInstance.empty(p), 2.0 * unit(p.d, 0), stream(0, "piece"))


class TestPessimalPoint:
    def test_four_orthonormal_pieces(self):
        p = params_deterministic(4, 1)
        basis = OrthonormalBasis(np.eye(p.d)[:4])
        inst = HardInstance.from_basis(p, basis)
        xhat, _ = pessimal_point(inst)
        assert abs(np.linalg.norm(xhat) - 1.0) < 1e-10
        values = inst.piece_matrix @ xhat
        np.testing.assert_allclose(values, -0.5 * np.ones(4), atol=1e-12)

    def test_single_piece_bound(self):
        p = params_deterministic(4, 1)
        inst = HardInstance.from_basis(p, OrthonormalBasis(unit(p.d, 0)[None, :]))
        xhat, bound = pessimal_point(inst)
        np.testing.assert_allclose(xhat, -unit(p.d, 0), atol=1e-15)
        assert bound * p.norm_denom == pytest.approx(-1.0 + p.gamma + p.k * p.delta, rel=1e-12)

    def test_t4_numeric_bound(self):
        p = params_deterministic(4, 1)
        inst = HardInstance.from_basis(p, OrthonormalBasis(np.eye(p.d)[:4]))
        _, bound = pessimal_point(inst)
        assert bound == pytest.approx((-0.5 + 1.0 / 6.0 + 1.0 / 72.0) / 1.125, rel=1e-12)
        assert bound == pytest.approx(-0.319444 / 1.125, abs=1e-6)

    def test_empty_instance_errors(self):
        p = params_deterministic(4, 1)
        with pytest.raises(ValueError, match="no pieces"):
            pessimal_point(HardInstance.empty(p))


class TestValidate:
    def test_broken_smoothing_radius(self):
        p = dataclasses.replace(params_deterministic(9, 2), delta=0.01)
        problems = validate(p)
        assert any("2k*delta <= gamma/m violated: 0.04 >" in v for v in problems)

    def test_too_small_dimension(self):
        p = dataclasses.replace(params_deterministic(4, 1), d=3)
        assert any("d > T violated" in v for v in validate(p))

    def test_randomized_margin_condition(self):
        p = dataclasses.replace(params_randomized(4, 1, 0.2), delta=0.02)
        assert any("1/(10*T^1.5)" in v for v in validate(p))

    def test_randomized_dimension_check(self):
        p = dataclasses.replace(params_randomized(4, 1, 0.2), d=100)
        assert any("violated: d = 100" in v for v in validate(p))


@given(st.integers(0, 2**31), st.integers(3, 7))
@settings(max_examples=25, deadline=None)
def test_appended_pieces_stay_orthonormal(seed, T):
    p = params_deterministic(T, 1)
    rng = stream(seed, "queries")
    inst = HardInstance.empty(p)
    for t in range(1, T + 1):
        x = rng.standard_normal(p.d)
        x = x / max(1.0, np.linalg.norm(x))
        if rng.random() < 0.3:
            x = np.zeros(p.d)  # force the degenerate branch sometimes
        inst = append_piece(inst, x, stream(seed, "piece", t))
    gram = inst.piece_matrix @ inst.piece_matrix.T
    np.testing.assert_allclose(gram, np.eye(T), atol=1e-9)
    xhat, _ = pessimal_point(inst)
    assert abs(np.linalg.norm(xhat) - 1.0) < 1e-10


def test_json_round_trip():
    p = params_deterministic(4, 2)
    inst = HardInstance.from_basis(
        p, OrthonormalBasis(np.linalg.qr(stream(5, "q").standard_normal((p.d, 4)))[0].T)
    )
    back = from_json(to_json(inst))
    assert back.params == inst.params
    assert back.num_pieces == inst.num_pieces
    for a, b in zip(inst.pieces, back.pieces):
        assert a.index == b.index and a.shift == b.shift
        np.testing.assert_array_equal(a.a, b.a)
    np.testing.assert_array_equal(back.basis.matrix, inst.basis.matrix)
