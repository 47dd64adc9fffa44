import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from blobflow.transport import TransportError, solve_transport


def linprog_value(a, b, C):
    """Independent LP solve of the same transportation problem."""
    n, m = C.shape
    A_eq = np.zeros((n + m, n * m))
    for i in range(n):
        A_eq[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A_eq[n + j, j::m] = 1.0
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]),
                  bounds=(0, None), method="highs")
    assert res.status == 0
    return float(res.fun)


def random_instance(rng, n, m):
    a = rng.uniform(0.2, 1.0, size=n)
    b = rng.uniform(0.2, 1.0, size=m)
    b *= a.sum() / b.sum()
    C = rng.uniform(0.0, 5.0, size=(n, m))
    return a, b, C


class TestKnownInstances:
    def test_identity_is_free(self):
        r = solve_transport([0.5, 0.5], [0.5, 0.5], np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert r.value == 0.0

    def test_2x2_by_hand(self):
        # cost 2.5 - 3t over plans parameterized by t in [0, 0.3]
        r = solve_transport([0.3, 0.7], [0.6, 0.4],
                            np.array([[1.0, 2.0], [3.0, 1.0]]))
        assert r.value == pytest.approx(1.6, rel=1e-14)

    def test_split_atom(self):
        r = solve_transport([0.5, 0.5], [1.0], np.array([[0.5], [0.5]]))
        assert r.value == pytest.approx(0.5, rel=1e-14)

    def test_monotone_matching_on_line(self, rng):
        # squared cost on the line: sorted pairing is optimal
        n = 8
        x = np.sort(rng.normal(size=n))
        y = np.sort(rng.normal(size=n))
        C = (x[:, None] - y[None, :]) ** 2
        r = solve_transport(np.full(n, 1.0 / n), np.full(n, 1.0 / n), C)
        assert r.value == pytest.approx(float(((x - y) ** 2).mean()), rel=1e-12)


class TestAgainstLP:
    @pytest.mark.parametrize("n,m", [(3, 5), (7, 4), (10, 10), (2, 13), (16, 9)])
    def test_value_matches_linprog(self, n, m, rng):
        a, b, C = random_instance(rng, n, m)
        r = solve_transport(a, b, C)
        assert r.value == pytest.approx(linprog_value(a, b, C), rel=1e-10, abs=1e-12)

    def test_ties_and_degeneracy(self, rng):
        # repeated support points give zero-cost ties and degenerate pivots
        x = np.repeat(rng.normal(size=4), 3)
        C = (x[:, None] - x[None, :]) ** 2
        a = np.full(12, 1.0 / 12)
        r = solve_transport(a, a, C)
        assert r.value == pytest.approx(0.0, abs=1e-15)


class TestDuals:
    def test_certificate(self, rng):
        a, b, C = random_instance(rng, 9, 7)
        r = solve_transport(a, b, C)
        red = C - r.u[:, None] - r.v[None, :]
        assert red.min() >= -1e-9
        assert float(a @ r.u + b @ r.v) == pytest.approx(r.value, rel=1e-12)


class TestFailures:
    def test_shape_mismatch(self):
        with pytest.raises(TransportError, match="sizes"):
            solve_transport([1.0], [0.5, 0.5], np.zeros((2, 2)))

    def test_nonpositive_marginal(self):
        with pytest.raises(TransportError, match="positive"):
            solve_transport([1.0, 0.0], [0.5, 0.5], np.zeros((2, 2)))

    def test_unbalanced(self):
        with pytest.raises(TransportError, match="unbalanced"):
            solve_transport([1.0, 1.0], [0.5, 0.5], np.zeros((2, 2)))

    def test_pivot_cap(self, rng):
        for _ in range(20):
            a, b, C = random_instance(rng, 8, 8)
            if solve_transport(a, b, C).n_pivots > 0:
                with pytest.raises(TransportError, match="pivot cap"):
                    solve_transport(a, b, C, max_pivots=0)
                return
        pytest.fail("no instance needed pivots")


@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 10**6))
def test_property_agrees_with_lp(n, m, seed):
    rng = np.random.default_rng(seed)
    a, b, C = random_instance(rng, n, m)
    r = solve_transport(a, b, C)
    assert r.value == pytest.approx(linprog_value(a, b, C), rel=1e-10, abs=1e-12)
    red = C - r.u[:, None] - r.v[None, :]
    assert red.min() >= -1e-9


class TestBruteforceOracle:
    """The acceptance suite leans on the enumeration oracle; pin its two
    implementations (compiled and pure Python) against each other and LP."""

    def test_twins_agree(self, rng):
        import _oracles

        for _ in range(12):
            n, m = int(rng.integers(2, 5)), int(rng.integers(2, 5))
            a, b, C = random_instance(rng, n, m)
            v = _oracles.transport_value_bruteforce(a, b, C)
            assert v == pytest.approx(_oracles._bruteforce_py(a, b, C),
                                      rel=1e-12, abs=1e-15)
            assert v == pytest.approx(linprog_value(a, b, C), rel=1e-10, abs=1e-12)
