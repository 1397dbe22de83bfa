# tests/test_pvalues.py

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ocs_arc.selection_runtime.pvalues import (
    build_calibration,
    conformal_p,
    conformal_p_naive,
    oracle_p,
)
from ocs_arc.selection_runtime.utils import InvalidInputError


# ---------------------------------------------------------------------------
# Calibration set
# ---------------------------------------------------------------------------

def test_build_calibration_sorts_and_keeps_duplicates():
    cal = build_calibration([3, 1, 2])
    assert cal.scores.tolist() == [1.0, 2.0, 3.0]
    assert cal.n == 3
    assert build_calibration([1, 1, 1]).scores.tolist() == [1.0, 1.0, 1.0]


def test_build_calibration_empty_and_nan():
    assert build_calibration([]).n == 0
    with pytest.raises(InvalidInputError):
        build_calibration([1.0, float("nan")])


def test_calibration_scores_are_read_only():
    cal = build_calibration([2.0, 1.0])
    with pytest.raises(ValueError):
        cal.scores[0] = 5.0


# ---------------------------------------------------------------------------
# Formula
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "scores, v_hat, u, expected",
    [
        ([], 4.2, 0.37, 0.37),
        ([1, 2, 3], 10.0, 1.0, 1.0),
        ([0.5, 0.5, 2.0], 0.5, 0.5, 0.375),
    ],
)
def test_conformal_p_examples(scores, v_hat, u, expected):
    cal = build_calibration(scores)
    rec = conformal_p(cal, v_hat, u)
    assert rec.p == pytest.approx(expected)
    assert rec.u == u and rec.v_hat == v_hat
    assert oracle_p(cal, v_hat, u).p == rec.p


@pytest.mark.parametrize("u", [-0.01, 1.01])
def test_conformal_p_rejects_u_outside_unit_interval(u):
    with pytest.raises(InvalidInputError):
        conformal_p(build_calibration([1.0]), 0.0, u)


def test_conformal_p_rejects_non_finite_score():
    with pytest.raises(InvalidInputError):
        conformal_p(build_calibration([1.0]), math.inf, 0.5)


def test_p_is_monotone_in_score():
    cal = build_calibration(np.linspace(-3, 3, 41))
    ps = [conformal_p(cal, v, 0.5).p for v in np.linspace(-4, 4, 81)]
    assert all(a <= b for a, b in zip(ps, ps[1:]))


@settings(max_examples=10_000, deadline=None)
@given(
    scores=st.lists(st.integers(min_value=-5, max_value=5).map(float), max_size=30),
    v_hat=st.integers(min_value=-6, max_value=6).map(float),
    u=st.floats(min_value=0, max_value=1, allow_nan=False),
)
def test_binary_search_counts_match_linear_scan(scores, v_hat, u):
    cal = build_calibration(scores)
    assert conformal_p(cal, v_hat, u).p == pytest.approx(conformal_p_naive(cal, v_hat, u), abs=1e-15)


# ---------------------------------------------------------------------------
# Superuniformity of the oracle p-value
# ---------------------------------------------------------------------------

def test_oracle_p_is_superuniform():
    # fresh calibration set per draw: the guarantee is marginal over it
    rng = np.random.default_rng(2024)
    draws = 10_000
    scores = rng.normal(size=(draws, 101))
    u = rng.uniform(size=draws)
    p = np.array(
        [oracle_p(build_calibration(row[:100]), row[100], ui).p for row, ui in zip(scores, u)]
    )
    for alpha in (0.01, 0.05, 0.1, 0.2, 0.5):
        se = math.sqrt(alpha * (1 - alpha) / draws)
        assert float(np.mean(p <= alpha)) <= alpha + 3 * se


def test_single_calibration_point_gives_half_mass_below_one_half():
    rng = np.random.default_rng(11)
    cal = build_calibration([0.0])
    draws = 20_000
    p = np.array(
        [oracle_p(cal, v, u).p for v, u in zip(rng.normal(size=draws), rng.uniform(size=draws))]
    )
    se = math.sqrt(0.25 / draws)
    assert abs(float(np.mean(p <= 0.5)) - 0.5) <= 4 * se
