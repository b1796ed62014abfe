import itertools

import numpy as np
import pytest

from erc_evo.errors import GuardError
from erc_evo.oracle import (
    enumerate_orthants,
    equal_weight,
    largest_eigenvalue,
    mvp_solve,
    orthant_signatures,
    parse_signature,
    project_simplex,
    solve_longonly_barrier,
    solve_orthant,
)
from erc_evo.risk import fitness_total
from erc_evo.synthetic import random_spd


def simplex_grid(n, step):
    m = int(round(1 / step))
    if n == 2:
        a = np.arange(m + 1) / m
        return np.column_stack([a, 1 - a])
    i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
    keep = i + j <= m
    i, j = i[keep], j[keep]
    return np.column_stack([i, j, m - i - j]) / m


def grid_mvp(C, step=0.001):
    X = simplex_grid(C.shape[0], step)
    v = np.einsum("ij,jk,ik->i", X, C, X)
    return X[np.argmin(v)], v.min()


class TestBarrier:
    def test_identity(self):
        np.testing.assert_allclose(solve_longonly_barrier(np.eye(4), 1.0), np.full(4, np.sqrt(0.5)), rtol=1e-12)

    def test_diagonal_closed_form(self):
        # 2 s_i^2 x_i^2 = 1  =>  x_i = 1 / (s_i sqrt 2)
        x = solve_longonly_barrier(np.diag([0.04, 0.09]), 1.0)
        np.testing.assert_allclose(x, [1 / (0.2 * np.sqrt(2)), 1 / (0.3 * np.sqrt(2))], rtol=1e-12)
        np.testing.assert_allclose(x / x.sum(), [0.6, 0.4], rtol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_stationarity(self, seed):
        rng = np.random.default_rng(seed)
        C = random_spd(int(rng.integers(2, 9)), rng)
        x = solve_longonly_barrier(C, 1.0)
        assert np.all(x > 0)
        np.testing.assert_allclose(x * (C @ x), 0.5, atol=1e-10)
        # Finite-difference gradient of the barrier objective vanishes.
        obj = lambda z: z @ C @ z - np.sum(np.log(z))
        h = 1e-6
        grad = [(obj(x + h * e) - obj(x - h * e)) / (2 * h) for e in np.eye(x.size)]
        np.testing.assert_allclose(grad, 0.0, atol=1e-6)

    def test_c_only_rescales(self):
        C = random_spd(5, np.random.default_rng(3))
        ref = solve_longonly_barrier(C, 1.0)
        for c in (0.1, 10.0):
            x = solve_longonly_barrier(C, c)
            np.testing.assert_allclose(x / x.sum(), ref / ref.sum(), atol=1e-8)
            np.testing.assert_allclose(x, np.sqrt(c) * ref, rtol=1e-9)

    def test_rejects_singular(self):
        with pytest.raises(ValueError):
            solve_longonly_barrier(np.ones((2, 2)))

    def test_rejects_bad_c(self):
        with pytest.raises(ValueError):
            solve_longonly_barrier(np.eye(2), 0.0)


class TestOrthants:
    def test_positive_identity(self):
        s = solve_orthant(np.eye(2), [1, 1])
        np.testing.assert_allclose(s.raw, [0.7071068] * 2, atol=1e-7)
        np.testing.assert_allclose(s.normalized, [0.5, 0.5])

    def test_mixed_identity_not_normalizable(self):
        s = solve_orthant(np.eye(2), [1, -1])
        np.testing.assert_allclose(s.raw, [0.7071068, -0.7071068], atol=1e-7)
        assert not s.normalizable and s.normalized is None

    def test_count_and_order(self):
        C = random_spd(3, np.random.default_rng(0))
        sols = enumerate_orthants(C)
        assert len(sols) == 8
        assert [s.signature for s in sols] == ["".join(p) for p in itertools.product("+-", repeat=3)]
        for s in sols:
            assert np.all(s.beta * s.raw > 0)
            np.testing.assert_allclose(s.raw * (C @ s.raw), 0.5, atol=1e-8)

    def test_sign_pairs(self):
        C = random_spd(4, np.random.default_rng(1))
        sols = {s.signature: s for s in enumerate_orthants(C)}
        for sig, s in sols.items():
            flip = "".join("+" if ch == "-" else "-" for ch in sig)
            np.testing.assert_allclose(sols[flip].raw, -s.raw, rtol=0, atol=1e-10)

    def test_guard(self):
        C = np.eye(21)
        with pytest.raises(GuardError):
            enumerate_orthants(C)
        assert len(list(orthant_signatures(2))) == 4

    def test_signature_parsing(self):
        np.testing.assert_array_equal(parse_signature("++-"), [1, 1, -1])
        with pytest.raises(ValueError):
            parse_signature("+x")
        with pytest.raises(ValueError):
            solve_orthant(np.eye(3), [1, 1])

    def test_positive_orthant_is_erc(self):
        C = random_spd(6, np.random.default_rng(5))
        s = solve_orthant(C, np.ones(6))
        assert fitness_total(s.normalized, C) < 1e-20


class TestMvp:
    def test_projection_example(self):
        np.testing.assert_allclose(project_simplex([0.9, 0.6, 0.1]), [0.65, 0.35, 0.0], atol=1e-15)

    def test_projection_idempotent(self):
        x = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(project_simplex(x), x)

    def test_power_iteration(self):
        C = random_spd(7, np.random.default_rng(2))
        assert largest_eigenvalue(C) == pytest.approx(np.linalg.eigvalsh(C)[-1], rel=1e-8)

    def test_identity(self):
        np.testing.assert_allclose(mvp_solve(np.eye(5)), np.full(5, 0.2), atol=1e-12)

    def test_two_asset_interior(self, C2):
        np.testing.assert_allclose(mvp_solve(C2), [8 / 11, 3 / 11], atol=1e-8)

    def test_boundary(self):
        C = np.diag([0.01, 100.0])
        x = mvp_solve(C)
        g, _ = grid_mvp(C)
        np.testing.assert_allclose(x, g, atol=1e-3)
        assert x[0] > 0.999

    @pytest.mark.parametrize("seed", range(3))
    def test_grid_optimality(self, seed):
        C = random_spd(3, np.random.default_rng(100 + seed))
        x = mvp_solve(C)
        _, vmin = grid_mvp(C)
        assert x @ C @ x <= vmin + 1e-6


class TestEqualWeight:
    def test_values(self):
        np.testing.assert_allclose(equal_weight(30), np.full(30, 1 / 30))
        assert round(equal_weight(30)[0], 2) == 0.03
        np.testing.assert_array_equal(equal_weight(1), [1.0])
        np.testing.assert_array_equal(equal_weight(4), [0.25] * 4)

    def test_zero(self):
        with pytest.raises(ValueError):
            equal_weight(0)
