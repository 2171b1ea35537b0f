import numpy as np
import pytest

from retool import lie


def test_so3_brackets_are_cross_products():
    alg = lie.so3()
    e1, e2, e3 = np.eye(3)
    assert np.allclose(lie.lie_bracket(alg, e1, e2), e3)
    assert np.allclose(lie.lie_bracket(alg, e2, e3), e1)
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(2, 3))
    assert np.allclose(lie.lie_bracket(alg, a, b), np.cross(a, b), atol=1e-14)


def test_so3_coadjoint_is_cross_product():
    # <ad*_xi mu, eta> = <mu, [xi, eta]> gives ad*_xi mu = mu x xi
    alg = lie.so3()
    xi, mu = np.array([1.0, 2.0, -0.5]), np.array([0.3, -1.0, 2.0])
    assert np.allclose(lie.coad(alg, xi, mu), np.cross(mu, xi), atol=1e-14)


def test_structure_checks():
    for alg in (lie.so3(), lie.t2(), lie.abelian(4)):
        assert alg.antisymmetry_residual() == 0.0
        assert alg.jacobi_residual() < 1e-14
    assert lie.t2().is_abelian() and not lie.so3().is_abelian()


def test_bad_structure_constants_rejected():
    c = np.zeros((2, 2, 2))
    c[0, 1, 0] = 1.0  # missing antisymmetric partner
    with pytest.raises(ValueError):
        lie.LieAlgebraSpec(c, np.eye(2))


def test_algebra_round_trip():
    alg = lie.so3()
    assert lie.LieAlgebraSpec.from_dict(alg.to_dict()) == alg


def test_builtin_algebra_names():
    assert lie.builtin_algebra("so3") == lie.so3()
    assert lie.builtin_algebra("t2") == lie.t2()
    assert lie.builtin_algebra("abelian:3").dim == 3
    with pytest.raises(ValueError):
        lie.builtin_algebra("sl2")


def test_cocentral_so3_circle_fails_with_witness():
    alg = lie.so3()
    res = lie.check_cocentral(alg, np.eye(3)[:, 2:], np.eye(3))
    assert not res and not res.cocentral
    a, b, c = res.witness
    assert abs(a[2]) < 1e-14
    assert np.allclose(c, np.cross(a, b))
    assert np.linalg.norm(c) > 0.5


def test_cocentral_trivial_cases():
    alg = lie.so3()
    # h equal to the ambient algebra: the complement is zero
    assert lie.check_cocentral(alg, np.eye(3), np.eye(3)).cocentral
    # ambient g_mu = span(e3) with h = span(e3)
    assert lie.check_cocentral(alg, np.eye(3)[:, 2:], np.eye(3)[:, 2:]).cocentral
    assert lie.check_cocentral(lie.t2(), np.eye(2)[:, :1], np.eye(2)).cocentral


def test_cocentral_requires_containment():
    with pytest.raises(ValueError):
        lie.check_cocentral(lie.so3(), np.eye(3)[:, :1], np.eye(3)[:, 2:])


def test_splitting_coordinates():
    alg = lie.so3()
    sp = lie.make_splitting(alg, np.eye(3)[:, 2:])
    assert sp.dims == (1, 2, 0)
    x = np.array([1.0, 2.0, 3.0])
    assert np.allclose(sp.embed(sp.coords(x, "m"), "m") + sp.embed(sp.coords(x, "gz"), "gz"), x)
    assert sp.invariance_residual(alg) < 1e-14
    assert lie.SplittingData.from_dict(sp.to_dict(), 3).dims == sp.dims


def test_splitting_not_invariant_detected():
    alg = lie.so3()
    e1, e2, e3 = np.eye(3)
    bad = lie.SplittingData(e3[:, None], (e1 + e3)[:, None] / np.sqrt(2), e2[:, None])
    assert bad.invariance_residual(alg) > 1e-3


def test_fixed_subspace_of_rotation():
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    rep = lie.GroupRepOnSpace(4, (np.kron(np.eye(2), rot),))
    assert lie.fixed_subspace(rep).shape == (4, 0)
    flip = lie.GroupRepOnSpace(2, (), (np.diag([1.0, -1.0]),))
    B = lie.fixed_subspace(flip)
    assert B.shape == (2, 1) and abs(abs(B[0, 0]) - 1) < 1e-14


def test_normalizer_of_circle_in_so3():
    alg = lie.so3()
    gz = np.eye(3)[:, 2:]
    ad = lie.GroupRepOnSpace(3, (alg.ad(gz[:, 0]),))
    assert lie.normalizer_algebra(alg, ad, gz).shape == (3, 1)


def test_so3_exponential_and_projection():
    w = np.array([0.3, -0.2, 0.9])
    R = lie.so3_exp(w)
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-14)
    assert np.allclose(R @ w, w)
    # closed form for a rotation about e3
    th = 0.7
    Rz = lie.so3_exp([0, 0, th])
    assert np.allclose(Rz[:2, :2], [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    G = lie.SO3Group()
    noisy = R + 1e-8 * np.random.default_rng(1).normal(size=(3, 3))
    assert G.manifold_error(G.project(noisy)) < 1e-14
    assert np.allclose(G.coadjoint(R, w), R @ w)


def test_torus_group():
    T = lie.group_for(lie.t2())
    g = T.exp([0.5, 1.0])
    assert np.allclose(T.coadjoint(g, [1.0, 2.0]), [1.0, 2.0])
    assert T.manifold_error(g) == 0.0


def test_jacobi_violation_rejected():
    rng = np.random.default_rng(3)
    c = rng.normal(size=(3, 3, 3))
    c = c - c.transpose(1, 0, 2)
    with pytest.raises(ValueError, match="Jacobi"):
        lie.LieAlgebraSpec(c, np.eye(3))
