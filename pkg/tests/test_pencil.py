import numpy as np
import pytest

from retool.pencil import (HessianPencil, Verdict, certify_at, certify_definite, eig_sym, golden_max,
                           lambda_min_profile, restrict)


def toy_pencil():
    return HessianPencil(np.diag([1.0, 1.0, -1.0, -1.0]), (np.eye(4),))


def test_eig_sym_known_spectrum():
    w, V = eig_sym(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert np.allclose(w, [1.0, 3.0])
    assert np.allclose(np.abs(V.T @ V), np.eye(2))


def test_eig_sym_on_subspace():
    M = np.diag([1.0, 5.0, -2.0])
    B = np.eye(3)[:, [0, 2]]
    w, _ = eig_sym(M, B)
    assert np.allclose(w, [-2.0, 1.0])
    assert np.allclose(restrict(M, B), np.diag([1.0, -2.0]))


def test_non_symmetric_rejected():
    with pytest.raises(ValueError):
        eig_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        HessianPencil(np.array([[np.nan, 0.0], [0.0, 1.0]]), ())


def test_toy_pencil_verdicts():
    p = toy_pencil()
    c = certify_definite(p)
    assert c.verdict is Verdict.NEGATIVE and c.eta_star[0] > 1.0
    assert c.truncated  # the optimum moves to the edge of the search box
    assert c.margin == pytest.approx(1.0 - c.eta_star[0])
    # eta < -1 makes the pencil positive definite with the same margin
    assert c.also_definite == Verdict.POSITIVE.value


def test_toy_pencil_is_symmetric_in_sign():
    # Both eta > 1 (negative definite) and eta < -1 (positive definite) work.
    p = toy_pencil()
    c = certify_definite(p, box=(-10.0, 10.0))
    # equal margins: ties go to the negative side
    assert c.verdict is Verdict.NEGATIVE
    assert c.also_definite == Verdict.POSITIVE.value
    assert c.best_lambda_min == pytest.approx(9.0)
    assert c.best_lambda_max == pytest.approx(-9.0)


def test_toy_pencil_boundaries():
    p = toy_pencil()
    for e in (-1.0, 1.0):
        c = certify_at(p, e)
        assert c.verdict is Verdict.INCONCLUSIVE and abs(c.margin) < 1e-8
    assert certify_at(p, 0.0).verdict is Verdict.INDEFINITE
    assert certify_at(p, 2.0).verdict is Verdict.NEGATIVE
    assert certify_at(p, -2.0).verdict is Verdict.POSITIVE


def test_top_pencil_optimum_against_grid():
    # A = 2.125 - ... closed form: H(eta) blocks [[A, B], [B, C]] with A = -1 - 2.5 eta, B = -eta, C = 1
    def lam_min(e):
        A, B, C = -1 - 2.5 * e, -e, 1.0
        return 0.5 * ((A + C) - np.sqrt((A - C) ** 2 + 4 * B * B))
    H0 = np.diag([-1.0, -1.0, 1.0, 1.0])
    Q = np.array([[2.5, 0, 0, 1], [0, 2.5, -1, 0], [0, -1, 0, 0], [1, 0, 0, 0]])
    p = HessianPencil(H0, (Q,))
    grid = np.linspace(-3, 1, 10001)
    vals = np.array([lam_min(e) for e in grid])
    c = certify_definite(p)
    assert c.verdict is Verdict.POSITIVE
    assert abs(c.eta_star[0] - grid[vals.argmax()]) < 1e-3
    assert c.margin >= vals.max() - 1e-12


def test_two_parameter_pencil():
    # H(eta) = diag(1 - eta1, 1 - eta2): definite positive when both eta < 1
    p = HessianPencil(np.eye(2), (np.diag([1.0, 0.0]), np.diag([0.0, 1.0])))
    c = certify_definite(p, box=[(-2, 2), (-2, 2)])
    assert c.verdict is Verdict.POSITIVE
    assert c.margin == pytest.approx(3.0)
    assert np.allclose(c.eta_star, [-2, -2], atol=1e-6)
    # deterministic under a fixed seed
    c2 = certify_definite(p, box=[(-2, 2), (-2, 2)])
    assert np.array_equal(c.eta_star, c2.eta_star)


def test_indefinite_for_all_eta():
    # eta does not touch a sign-indefinite block
    H0 = np.diag([1.0, -1.0, 0.0, 0.0])
    H0[2, 3] = H0[3, 2] = 1.0
    p = HessianPencil(H0, (np.diag([0.0, 0.0, 1.0, 1.0]),))
    c = certify_definite(p)
    assert c.verdict is Verdict.INDEFINITE and c.margin < 0


def test_empty_parameter_pencil():
    c = certify_definite(HessianPencil(np.diag([2.0, 3.0]), ()))
    assert c.verdict is Verdict.POSITIVE and c.margin == pytest.approx(2.0)


def test_zero_base_uses_momentum_scale():
    p = HessianPencil(np.zeros((2, 2)), (np.diag([1.0, -1.0]),))
    c = certify_definite(p)
    assert c.tolerance == pytest.approx(1e-8)
    assert c.verdict is Verdict.INCONCLUSIVE


def test_box_validation():
    with pytest.raises(ValueError):
        certify_definite(toy_pencil(), box=(1.0, -1.0))
    with pytest.raises(ValueError):
        certify_definite(toy_pencil(), box=(0.0, np.inf))


def test_golden_max_finds_interior_and_edge():
    x, f, _ = golden_max(lambda t: -(t - 0.3) ** 2, -1, 1)
    assert abs(x - 0.3) < 1e-6
    x, f, _ = golden_max(lambda t: t, -1, 1)
    assert x == 1.0


def test_lambda_min_profile_order_and_threads():
    p = toy_pencil()
    grid = np.linspace(-3, 3, 61)
    a = lambda_min_profile(p, grid)
    b = lambda_min_profile(p, grid, threads=4)
    assert np.array_equal(a, b)
    assert np.allclose(a[:, 1], np.minimum(1 - grid, -1 - grid))
    assert np.allclose(a[:, 2], np.maximum(1 - grid, -1 - grid))


def test_certificate_serialises():
    d = certify_definite(toy_pencil()).to_dict()
    assert d["verdict"] == "NegativeDefinite"
    assert isinstance(d["eta_star"], list)
