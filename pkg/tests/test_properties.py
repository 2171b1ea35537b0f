"""Property-based checks with randomly generated inputs."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from retool import examples as ex
from retool import lie
from retool import model as md
from retool.pencil import HessianPencil

finite = st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False)
seeds = st.integers(0, 2**32 - 1)


def vec(n):
    return arrays(np.float64, n, elements=finite)


def random_sym(rng, n):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


@settings(max_examples=200, deadline=None)
@given(seeds, st.integers(2, 6), st.integers(1, 3), st.floats(0.0, 1.0))
def test_lambda_min_concave(seed, n, k, s):
    rng = np.random.default_rng(seed)
    p = HessianPencil(random_sym(rng, n), tuple(random_sym(rng, n) for _ in range(k)))
    a, b = 3 * rng.standard_normal(k), 3 * rng.standard_normal(k)
    lo = p.extreme_eigs(s * a + (1 - s) * b)[0]
    assert lo >= s * p.extreme_eigs(a)[0] + (1 - s) * p.extreme_eigs(b)[0] - 1e-9
    hi = p.extreme_eigs(s * a + (1 - s) * b)[1]
    assert hi <= s * p.extreme_eigs(a)[1] + (1 - s) * p.extreme_eigs(b)[1] + 1e-9


@settings(max_examples=100, deadline=None)
@given(vec(3), vec(3), vec(3))
def test_coad_pairing_so3(xi, mu, eta):
    alg = lie.so3()
    lhs = lie.coad(alg, xi, mu) @ eta
    rhs = mu @ lie.lie_bracket(alg, xi, eta)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs), np.abs(xi).max() * np.abs(mu).max() * np.abs(eta).max())


@settings(max_examples=100, deadline=None)
@given(vec(3), vec(3), vec(3))
def test_jacobi_on_vectors(a, b, c):
    alg = lie.so3()
    br = lambda x, y: lie.lie_bracket(alg, x, y)  # noqa: E731
    total = br(a, br(b, c)) + br(b, br(c, a)) + br(c, br(a, b))
    assert np.abs(total).max() <= 1e-12 * max(1.0, np.abs(a).max() * np.abs(b).max() * np.abs(c).max())


def _models():
    return [ex.lagrange_top(quartic=0.4), ex.toy_so3_s1(0.8), ex.two_vortices(2.0, 1.0),
            ex.two_vortices(1.0, 1.0)]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 3), seeds)
def test_gradients_match_finite_differences(which, seed):
    m = _models()[which]
    rng = np.random.default_rng(seed)
    rho = 0.2 * rng.standard_normal(m.dim_mstar)
    v = 0.2 * rng.standard_normal(m.N_dim)
    h = m.hamiltonian
    x = np.concatenate([rho, v])
    f = lambda z: h.value(z[: m.dim_mstar], z[m.dim_mstar:])  # noqa: E731
    fd = md._fd_grad(f, x)
    an = np.concatenate([np.asarray(g, float) for g in h.grad(rho, v)])
    assert np.linalg.norm(fd - an) <= 1e-5 * max(1.0, np.linalg.norm(an))
    if m.N_dim:
        fv = lambda z: h.value(rho, z)  # noqa: E731
        assert np.allclose(md._fd_hess(fv, v), h.hess_v(rho, v), atol=1e-4)


@settings(max_examples=60, deadline=None)
@given(st.floats(-2.0, 3.0).filter(lambda e: abs(e - 0.5) > 1e-3), seeds)
def test_vortex_signature_invariant_under_slice_change(eta, seed):
    m = ex.two_vortices(2.0, 1.0)
    H = md.hbar_eta_derivs(m, [eta], np.zeros(0), np.zeros(2))[3]
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((2, 2))
    if abs(np.linalg.det(P)) < 1e-3:
        P = P + np.eye(2)
    w1 = np.linalg.eigvalsh(H)
    w2 = np.linalg.eigvalsh(P.T @ H @ P)
    assert np.array_equal(np.sign(w1), np.sign(w2))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2), seeds, st.floats(-3.0, 3.0))
def test_momentum_homogeneous_of_degree_two(which, seed, t):
    m = _models()[which]
    v = np.random.default_rng(seed).standard_normal(m.N_dim)
    assert np.allclose(md.momentum_map_N(m, t * v), t * t * md.momentum_map_N(m, v), rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2), seeds)
def test_omega_Y_antisymmetric(which, seed):
    m = _models()[which]
    rng = np.random.default_rng(seed)
    pt = (rng.standard_normal(m.dim_mstar), rng.standard_normal(m.N_dim))

    def tangent():
        return rng.standard_normal(m.alg.dim), rng.standard_normal(m.dim_mstar), rng.standard_normal(m.N_dim)

    t1, t2 = tangent(), tangent()
    a, b = md.eval_omega_Y(m, pt, t1, t2), md.eval_omega_Y(m, pt, t2, t1)
    assert abs(a + b) <= 1e-12 * max(1.0, abs(a))
    assert md.eval_omega_Y(m, pt, t1, t1) == 0.0 or abs(md.eval_omega_Y(m, pt, t1, t1)) < 1e-12


def _spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


@settings(max_examples=5, deadline=None)
@given(seeds)
def test_cocentral_independent_of_inner_product(seed):
    rng = np.random.default_rng(seed)
    so3 = lie.so3()
    alg = lie.LieAlgebraSpec(so3.c, _spd(rng, 3))
    assert not lie.check_cocentral(alg, np.eye(3)[:, 2:], np.eye(3)).cocentral
    assert lie.check_cocentral(alg, np.eye(3)[:, 2:], np.eye(3)[:, 2:]).cocentral
    t2 = lie.LieAlgebraSpec(np.zeros((2, 2, 2)), _spd(rng, 2))
    for sub in (np.zeros((2, 0)), np.eye(2)[:, :1], rng.standard_normal((2, 1)), np.eye(2)):
        assert lie.check_cocentral(t2, sub, np.eye(2)).cocentral


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_restricted_pencil_congruence(seed):
    # certifying the pencil in different bases of the same subspace gives the same verdict
    from retool.pencil import certify_definite
    rng = np.random.default_rng(seed)
    n = 4
    H0, Q = random_sym(rng, n), random_sym(rng, n)
    B = np.linalg.qr(rng.standard_normal((n, 2)))[0]
    R = np.linalg.qr(rng.standard_normal((2, 2)))[0]
    c1 = certify_definite(HessianPencil(H0, (Q,), B), box=(-5, 5))
    c2 = certify_definite(HessianPencil(H0, (Q,), B @ R), box=(-5, 5))
    assert c1.verdict == c2.verdict
    assert abs(c1.margin - c2.margin) < 1e-8 * max(1.0, abs(c1.margin))
