import math

import numpy as np
import pytest

from meanpoint.hull import project_onto_hull


def simplex_project_rows(lam):
    """Euclidean projection of each row onto the probability simplex."""
    n = lam.shape[1]
    srt = -np.sort(-lam, axis=1)
    css = (np.cumsum(srt, axis=1) - 1.0) / np.arange(1, n + 1)
    k = np.sum(srt > css, axis=1) - 1
    theta = css[np.arange(lam.shape[0]), k]
    return np.maximum(lam - theta[:, None], 0.0)


def pgd_oracle(y, V, steps=1_000_000):
    """Independent oracle: minimize ||V^T lam - y||^2 over the simplex by
    plain projected gradient descent."""
    return pgd_oracle_batch(y[None, :], V[None, :, :], steps)[0]


def pgd_oracle_batch(ys, Vs, steps=1_000_000):
    k, n, _ = Vs.shape
    G = np.einsum("kim,kjm->kij", Vs, Vs)
    b = np.einsum("kim,km->ki", Vs, ys)
    lips = np.array([np.linalg.eigvalsh(G[i])[-1] for i in range(k)])
    step = 1.0 / np.maximum(lips, 1e-12)
    lam = np.full((k, n), 1.0 / n)
    for _ in range(steps):
        grad = np.einsum("kij,kj->ki", G, lam) - b
        lam = simplex_project_rows(lam - step[:, None] * grad)
    return np.einsum("ki,kim->km", lam, Vs)


def random_instance(rng, m=3, n_vertices=6):
    V = rng.random((n_vertices, m)) * 2.0 - 0.5
    y = rng.random(m) * 3.0 - 1.0
    return y, V


class TestProjectOntoHull:
    def test_vertex_target_returns_itself(self):
        V = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        res = project_onto_hull(V[1], V)
        assert np.array_equal(res.point, V[1])
        assert res.gap == pytest.approx(0.0, abs=1e-12)
        assert res.certified

    def test_orthogonal_projection_onto_segment(self):
        V = np.array([[0.0, 0.0], [1.0, 0.0]])
        res = project_onto_hull(np.array([0.5, 1.0]), V)
        assert np.allclose(res.point, [0.5, 0.0], atol=1e-7)

    def test_beyond_endpoint_clamps(self):
        V = np.array([[0.0, 0.0], [1.0, 0.0]])
        res = project_onto_hull(np.array([2.0, 3.0]), V)
        assert np.allclose(res.point, [1.0, 0.0], atol=1e-9)

    def test_degenerate_hull_returns_the_vertex(self):
        V = np.tile(np.array([[0.25, 0.75]]), (4, 1))
        res = project_onto_hull(np.array([5.0, 5.0]), V)
        assert np.array_equal(res.point, V[0])
        assert res.certified

    def test_weights_are_convex_combination(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            y, V = random_instance(rng)
            res = project_onto_hull(y, V)
            w = np.zeros(len(V))
            for i, v in res.weights.items():
                assert v >= 0
                w[i] = v
            assert sum(res.weights.values()) == pytest.approx(1.0, abs=1e-9)
            assert np.linalg.norm(w @ V - res.point) <= 1e-8 * math.sqrt(V.shape[1])

    def test_agrees_with_pgd_oracle(self):
        # smaller step count than the acceptance run, still well converged
        rng = np.random.default_rng(1)
        for _ in range(5):
            y, V = random_instance(rng)
            res = project_onto_hull(y, V)
            ref = pgd_oracle(y, V, steps=100_000)
            assert np.linalg.norm(res.point - ref) <= 1e-4

    def test_certificate_holds_on_random_instances(self):
        rng = np.random.default_rng(2)
        tol = 1e-7
        for _ in range(50):
            y, V = random_instance(rng, m=int(rng.integers(1, 6)),
                                   n_vertices=int(rng.integers(1, 12)))
            res = project_onto_hull(y, V, tol=tol)
            assert res.certified
            resid = np.linalg.norm(y - res.point)
            gaps = (V - res.point) @ (y - res.point)
            assert gaps.max() <= tol * resid * math.sqrt(V.shape[1]) + 1e-10

    def test_non_expansive(self):
        rng = np.random.default_rng(3)
        tol = 1e-7
        for _ in range(20):
            _, V = random_instance(rng)
            y1 = rng.random(3) * 4 - 2
            y2 = rng.random(3) * 4 - 2
            p1 = project_onto_hull(y1, V, tol=tol).point
            p2 = project_onto_hull(y2, V, tol=tol).point
            m = V.shape[1]
            assert np.linalg.norm(p1 - p2) <= \
                np.linalg.norm(y1 - y2) + 2 * tol * math.sqrt(m)

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        tol = 1e-7
        for _ in range(20):
            y, V = random_instance(rng)
            p1 = project_onto_hull(y, V, tol=tol).point
            p2 = project_onto_hull(p1, V, tol=tol).point
            assert np.linalg.norm(p2 - p1) <= 2 * tol * math.sqrt(V.shape[1])

    def test_no_farther_than_any_vertex(self):
        rng = np.random.default_rng(5)
        tol = 1e-7
        for _ in range(20):
            y, V = random_instance(rng)
            p = project_onto_hull(y, V, tol=tol).point
            best_vertex = np.linalg.norm(V - y, axis=1).min()
            assert np.linalg.norm(p - y) <= \
                best_vertex + tol * math.sqrt(V.shape[1])

    def test_projection_error_inequality_monte_carlo(self):
        # E||p - x||^2 <= E sup_w <w, W - x> for W = x + noise, x in hull;
        # both sides by Monte Carlo with slack for sampling error
        rng = np.random.default_rng(6)
        V = rng.random((5, 3))
        lam = rng.dirichlet(np.ones(5))
        x = lam @ V
        lhs, rhs = [], []
        for _ in range(400):
            noise = rng.normal(0.0, 0.3, size=3)
            p = project_onto_hull(x + noise, V).point
            lhs.append(float((p - x) @ (p - x)))
            rhs.append(float(((V - x) @ noise).max()))
        assert np.mean(lhs) <= 1.2 * np.mean(rhs)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            project_onto_hull(np.array([0.0, 1.0]), np.array([[0.0]]))
        with pytest.raises(ValueError):
            project_onto_hull(np.array([0.0]), np.array([[0.0]]), tol=0.0)
