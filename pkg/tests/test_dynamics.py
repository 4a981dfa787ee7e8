import csv
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ser_dsp import dynamics as dyn
from ser_dsp.dynamics import ConvergenceClass as CC


def values_at(rows, x):
    return [r for r in rows if math.isclose(r[0], x, abs_tol=1e-12)]


class TestIterate:
    def test_hand_trajectory(self):
        t = dyn.iterate_map(0.0, 0.5, 3)
        assert t.tolist() == [0.5, -0.25, -0.0625, -0.00390625]
        assert abs(dyn.iterate_map(0.0, 0.5, 50)[-1]) < 1e-30

    @pytest.mark.parametrize("b", [-0.25, 0.0, 0.5, 0.7])
    def test_beta_is_fixed(self, b):
        beta = dyn.fixed_points(b)[1]
        assert np.allclose(dyn.iterate_map(b, beta, 20), beta, atol=1e-12)

    def test_escape(self):
        t = dyn.iterate_map(0.0, 2.0, 12)
        assert t[1] == -4 and t[2] == -16
        finite = t[np.isfinite(t)]
        assert np.all(np.diff(finite[1:]) < 0)
        assert t[-1] == dyn.SENTINEL

    def test_vectorized_shape(self):
        t = dyn.iterate_map(np.zeros(3), np.array([0.1, 0.2, 0.3]), 5)
        assert t.shape == (3, 6)

    def test_negative_steps(self):
        with pytest.raises(ValueError):
            dyn.iterate_map(0, 0, -1)

    @given(st.floats(-1.4, 0.4), st.floats(-0.5, 0.5), st.integers(1, 12))
    @settings(max_examples=60, deadline=None)
    def test_coordinate_bridge(self, s, d0, n):
        d = dyn.iterate_error(s, d0, n)
        e = dyn.iterate_map(s * s + s, 2 * d0 + s, n)
        ok = np.isfinite(e) & (np.abs(e) < 1e3)
        assert np.allclose(e[ok], 2 * d[ok] + s, rtol=1e-9, atol=1e-9)

    def test_map_instance(self):
        m = dyn.MapInstance.from_error(-1.0, 0.1)
        assert (m.b, m.e0, m.s) == (0.0, pytest.approx(-0.8), -1.0)


class TestFixedPoints:
    @pytest.mark.parametrize("b,expected", [(0, (-1.0, 0.0)), (2, (-2.0, 1.0)), (-0.25, (-0.5, -0.5))])
    def test_values(self, b, expected):
        assert dyn.fixed_points(b) == pytest.approx(expected)

    def test_complex_roots(self):
        with pytest.raises(ValueError):
            dyn.fixed_points(-0.3)

    @given(st.floats(-0.25, 100))
    def test_roots_of_map(self, b):
        alpha, beta = dyn.fixed_points(b)
        assert alpha <= beta
        for r in (alpha, beta):
            assert -r * r + b == pytest.approx(r, abs=1e-9 * max(1, abs(b)))


class TestClassify:
    def test_zero_error(self):
        assert dyn.classify(0, 0.1).kind is CC.ZERO_ERROR
        assert dyn.observe(0, 0.1).kind is CC.ZERO_ERROR

    def test_offset(self):
        c = dyn.classify(-1.0, 0.1)
        assert c.kind is CC.OFFSET and c.offset == pytest.approx(0.5)
        o = dyn.observe(-1.0, 0.1)
        assert o.kind is CC.OFFSET and o.offset == pytest.approx(0.5, abs=1e-9)

    def test_diverges(self):
        assert dyn.classify(0, 1).kind is CC.DIVERGES
        assert dyn.observe(0, 1).kind is CC.DIVERGES

    def test_periodic_and_chaotic_regions(self):
        s1 = (-1 + math.sqrt(5)) / 2  # b = 1
        assert dyn.classify(s1, 0.05).kind is CC.PERIODIC
        s18 = (-1 + math.sqrt(1 + 4 * 1.8)) / 2
        assert dyn.classify(s18, 0.05).kind is CC.CHAOTIC
        assert dyn.classify(1.2, 0.05).kind is CC.UNBOUNDED_OR_BOUNDED

    def test_configurable_limit(self):
        s = (-1 + math.sqrt(1 + 4 * 1.28)) / 2
        assert dyn.classify(s, 0.05).kind is CC.PERIODIC
        assert dyn.classify(s, 0.05, period_two_limit=1.25).kind is CC.CHAOTIC

    def test_boundary_cases(self):
        # e0 = alpha exactly: the trajectory sits on alpha
        c = dyn.classify(0.5, -1.0)
        assert c.kind is CC.OFFSET and c.offset == pytest.approx(-1.0)
        assert dyn.observe(0.5, -1.0).offset == pytest.approx(-1.0)
        assert dyn.classify(-1.0, 1.0).kind is CC.ZERO_ERROR
        assert dyn.observe(-1.0, 1.0).kind is CC.ZERO_ERROR

    def test_start_on_beta(self):
        assert dyn.classify(0.625, 0.0).kind is CC.ZERO_ERROR
        assert dyn.observe(0.625, 0.0).kind is CC.ZERO_ERROR

    def test_str(self):
        assert str(dyn.classify(-1.0, 0.1)) == "ConvergesToOffset(0.5)"

    @given(st.floats(-1.49, 0.99), st.floats(-2.0, 2.0))
    @settings(max_examples=200, deadline=None)
    def test_agrees_with_simulation_away_from_edges(self, s, d0):
        e0, b, a_abs = (float(v) for v in dyn.map_parameters(s, d0))
        assume(abs(abs(e0) - a_abs) > 1e-3)
        for edge in (-0.25, 0.0, 0.75, 1.25, 1.3, 2.0):
            assume(abs(b - edge) > 0.02)
        assume(abs(abs(s) - 0.5) > 0.02)
        # starting on beta (exact recovery or the fixed offset) is its own edge
        assume(abs(d0) > 1e-3 and abs(d0 + s + 0.5) > 1e-3)
        pred = dyn.classify(s, d0, period_two_limit=1.25)
        seen = dyn.observe(s, d0)
        assert pred.kind is seen.kind
        if pred.kind is CC.OFFSET:
            assert seen.offset == pytest.approx(pred.offset, abs=1e-5)

    def test_period_four_window(self):
        # just above b = 5/4 the trajectory already visits four values
        b = 1.28
        values, _ = dyn.terminal_set(b, 0.1)
        assert len(values) == 4


class TestOrbitProperties:
    def test_never_settles_on_alpha(self):
        rng = np.random.default_rng(0)
        for b in (0.0, 0.5, 1.0, 1.8):
            alpha = dyn.fixed_points(b)[0]
            e0 = alpha + rng.uniform(1e-9, 1e-3, 50)
            tail = dyn.iterate_map(b, e0, 1000)[:, -1]
            assert np.all(np.abs(tail - alpha) > 1e-3)

    @given(st.floats(-0.25, 2.0), st.floats(0.0, 5.0))
    @settings(max_examples=60, deadline=None)
    def test_monotone_after_escape(self, b, extra):
        alpha = dyn.fixed_points(b)[0]
        e0 = abs(alpha) + 1e-6 + extra
        t = dyn.iterate_map(b, e0, 40)
        t = t[np.isfinite(t)]
        assert np.all(np.diff(t[1:]) < 0)


@pytest.fixture(scope="module")
def rows():
    return dyn.bifurcation(0.5, 1.8, 3, 50, 1000, seed=0)


class TestBifurcation:
    def test_single_value(self, rows):
        r = values_at(rows, 0.5)
        assert len(r) == 1 and r[0][1] == pytest.approx((-1 + math.sqrt(3)) / 2, abs=1e-6)

    def test_two_values(self):
        # period-2 orbit of -e^2 + 1 is {0, 1}
        r = dyn.bifurcation(1.0, 1.0, 1, 50, 1000, seed=0)
        assert sorted(v for _, v, _ in r) == pytest.approx([0.0, 1.0], abs=1e-6)

    def test_many_values(self, rows):
        assert len(values_at(rows, 1.8)) >= 4

    def test_delta_coordinates(self):
        rows = dyn.bifurcation_delta(0.0, 0.3, 2, 20, 500, seed=1)
        assert all(abs(v) < 1e-6 for _, v, _ in rows)

    def test_multiplicity_sums(self):
        rows = dyn.bifurcation(0.5, 0.5, 1, 30, 200, seed=2)
        assert sum(c for *_, c in rows) == 30 * dyn.TAIL

    def test_preconditions(self):
        with pytest.raises(ValueError):
            dyn.bifurcation(-0.3, 1, 2, 2)
        with pytest.raises(ValueError):
            dyn.bifurcation(0, 1, 2, 2, n_iter=50)

    def test_deterministic(self):
        assert dyn.bifurcation(0, 2, 5, 10, 200, 3) == dyn.bifurcation(0, 2, 5, 10, 200, 3)

    def test_csv(self, tmp_path):
        path = tmp_path / "b.csv"
        dyn.write_bifurcation(path, [(0.5, 0.366025403784, 64)])
        with open(path) as fh:
            got = list(csv.reader(fh))
        assert got == [["b", "terminal_value", "multiplicity"], ["0.5", "0.366025403784", "64"]]
