"""Relative equilibria of the slice model: residuals, Newton solves and branches.

A point (rho, v) with multiplier eta in g_z is a relative equilibrium when

    r1 = m*-part of ad*_xi (rho + J_N(v)) = 0,   xi = D_m* hbar + eta
    r2 = D_N hbar_eta(rho, v) = 0.

Newton iterations act on v only, with (rho, eta) as parameters.  r1 is
checked afterwards rather than solved for.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import lie
from .model import (LocalModel, alpha_of, eval_omega_Y, fixed_spaces, fixes_point, hbar_derivs, hbar_eta_derivs,
                    momentum_map_N, momentum_map_Y, stabilizer_dim, subgroup, velocity)
from .pencil import HessianPencil

RESTARTS = 6
RESIDUAL_TOL = 1e-10
MAX_NEWTON = 50


class SingularJacobianError(RuntimeError):
    """Raised when the slice Hessian is singular: the degenerate regime."""


class HypothesisError(RuntimeError):
    """A precondition of the persistence or bifurcation results does not hold."""

    def __init__(self, hypothesis: str, message: str):
        super().__init__(f"[{hypothesis}] {message}")
        self.hypothesis = hypothesis


class ConvergenceError(RuntimeError):
    pass


@dataclass
class REPoint:
    rho: np.ndarray
    v: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    r1: float
    r2: float
    converged: bool = True
    iterations: int = 0

    def to_dict(self) -> dict:
        return {k: (np.asarray(getattr(self, k)).tolist() if k in ("rho", "v", "eta", "xi")
                    else getattr(self, k)) for k in ("rho", "v", "eta", "xi", "r1", "r2", "converged", "iterations")}


def re_residual(m: LocalModel, rho, eta, v) -> tuple:
    """(r1 in m*, r2 in N*)."""
    rho, v, eta = m.check_dims(rho=rho, v=v, eta=eta)
    _, g_rho, g_v, _ = hbar_eta_derivs(m, eta, rho, v, need_hess=False)
    if not (np.all(np.isfinite(g_rho)) and np.all(np.isfinite(g_v))):
        raise FloatingPointError("non-finite derivative in residual")
    xi = velocity(m, rho, v, eta)
    full = lie.coad(m.alg, xi, alpha_of(m, rho, v))
    r1 = m.splitting.dual_coords(full, "m") if m.dim_mstar else np.zeros(0)
    return r1, g_v


def make_point(m: LocalModel, rho, eta, v, iterations: int = 0) -> REPoint:
    rho, v, eta = m.check_dims(rho=rho, v=v, eta=eta)
    r1, r2 = re_residual(m, rho, eta, v)
    n1, n2 = float(np.linalg.norm(r1)), float(np.linalg.norm(r2))
    return REPoint(rho, v, eta, velocity(m, rho, v, eta), n1, n2,
                   n1 < RESIDUAL_TOL and n2 < RESIDUAL_TOL, iterations)


def _scale(m: LocalModel, H: np.ndarray) -> float:
    norms = [np.linalg.norm(H, 2) if H.size else 0.0] + [np.linalg.norm(q, 2) for q in m.Q] + [1.0]
    return float(max(norms))


def solve_re(m: LocalModel, guess, constrain_to=None, tol: float = RESIDUAL_TOL,
             max_iter: int = MAX_NEWTON) -> REPoint:
    """Newton on v in N^K with (rho, eta) fixed; r1 must vanish at the solution."""
    rho, eta, v = guess
    rho, v, eta = m.check_dims(rho=rho, v=v, eta=eta)
    K = subgroup(m, constrain_to)
    _, BN, _ = fixed_spaces(m, K)
    if not fixes_point(m, K, rho, v, tol=1e-9):
        raise ValueError(f"guess is not fixed by subgroup '{K.name}'")
    v = BN @ (BN.T @ v) if BN.size else np.zeros(m.N_dim)
    it = 0
    for it in range(max_iter + 1):
        _, _, g_v, H = hbar_eta_derivs(m, eta, rho, v)
        if np.linalg.norm(g_v) < tol:
            break
        if it == max_iter:
            raise ConvergenceError(f"Newton did not converge in {max_iter} iterations "
                                   f"(|r2| = {np.linalg.norm(g_v):.3e})")
        J = BN.T @ H @ BN
        w = np.linalg.eigvalsh(J) if J.size else np.zeros(0)
        if w.size == 0 or np.abs(w).min() < 1e-10 * _scale(m, H):
            raise SingularJacobianError("slice Hessian restricted to the fixed subspace is singular")
        v = v - BN @ np.linalg.solve(J, BN.T @ g_v)
    J = BN.T @ hbar_eta_derivs(m, eta, rho, v)[3] @ BN
    if J.size and np.abs(np.linalg.eigvalsh(J)).min() < 1e-8 * _scale(m, J):
        raise SingularJacobianError("slice Hessian restricted to the fixed subspace is singular "
                                    "at the solution (degenerate regime)")
    point = make_point(m, rho, eta, v, it)
    if point.r2 >= tol:
        raise ConvergenceError(f"r2 = {point.r2:.3e} after Newton")
    if point.r1 >= tol:
        raise HypothesisError("co-central", f"m*-residual r1 = {point.r1:.3e} does not vanish; "
                              "the isotropy subalgebra is not co-central for this data")
    return point


# ---------------------------------------------------------------------- branches

@dataclass
class BranchNode:
    index: tuple
    rho_coords: np.ndarray
    eta_coords: np.ndarray
    point: REPoint | None
    jy: np.ndarray | None = None
    eig_fixed: np.ndarray | None = None
    eig_full: np.ndarray | None = None
    stabilizer_dim: int | None = None
    K_fixes: bool | None = None
    error: str = ""

    @property
    def converged(self) -> bool:
        return self.point is not None and self.point.converged

    def to_dict(self) -> dict:
        d = {"index": list(self.index), "rho_coords": self.rho_coords.tolist(),
             "eta_coords": self.eta_coords.tolist(), "converged": self.converged, "error": self.error}
        if self.point is not None:
            d.update(point=self.point.to_dict(), jy=self.jy.tolist(),
                     eig_fixed=self.eig_fixed.tolist(), eig_full=self.eig_full.tolist(),
                     stabilizer_dim=self.stabilizer_dim, K_fixes=self.K_fixes)
        return d


@dataclass
class Branch:
    subgroup: str
    rho_axes: list
    eta_axes: list
    rho_basis: np.ndarray
    eta_basis: np.ndarray
    nodes: list
    flags: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.rho_axes + self.eta_axes)

    @property
    def all_converged(self) -> bool:
        return all(n.converged for n in self.nodes)

    def origin(self) -> BranchNode:
        idx = tuple(int(np.argmin(np.abs(a))) for a in self.rho_axes + self.eta_axes)
        return next(n for n in self.nodes if n.index == idx)

    def to_dict(self) -> dict:
        return {
            "subgroup": self.subgroup,
            "chart": {"rho_axes": [np.asarray(a).tolist() for a in self.rho_axes],
                      "eta_axes": [np.asarray(a).tolist() for a in self.eta_axes],
                      "rho_basis": self.rho_basis.tolist(), "eta_basis": self.eta_basis.tolist()},
            "nodes": [n.to_dict() for n in self.nodes],
            "flags": self.flags,
        }


def _check_axes(axes, dim, what):
    axes = [np.asarray(a, float) for a in (axes or [])]
    if len(axes) == 0:
        axes = [np.zeros(1) for _ in range(dim)]
    if len(axes) != dim:
        raise ValueError(f"{what}: expected {dim} axes, got {len(axes)}")
    for a in axes:
        if a.ndim != 1 or a.size == 0:
            raise ValueError(f"{what}: each axis must be a non-empty 1-D array")
        if np.any(np.diff(a) <= 0):
            raise ValueError(f"{what}: axis values must be strictly increasing")
        if np.min(np.abs(a)) > 1e-14:
            raise ValueError(f"{what}: each axis must contain 0 (the base point)")
    return axes


def continue_branch(m: LocalModel, base: REPoint, K=None, rho_axes=None, eta_axes=None) -> Branch:
    """Natural-parameter continuation over (m*)^K x (g_z)^K offsets from ``base``.

    Axis values are coordinates with respect to orthonormal bases of the fixed
    subspaces; every axis must contain 0.
    """
    Kg = subgroup(m, K)
    Bm, BN, Bz = fixed_spaces(m, Kg)
    rho_axes = _check_axes(rho_axes, Bm.shape[1], "rho grid")
    eta_axes = _check_axes(eta_axes, Bz.shape[1], "eta grid")
    _, _, _, H = hbar_eta_derivs(m, base.eta, base.rho, base.v)
    J = BN.T @ H @ BN
    if J.size and np.abs(np.linalg.eigvalsh(J)).min() < 1e-10 * _scale(m, H):
        raise SingularJacobianError("restricted slice Hessian is degenerate at the base point")

    axes = rho_axes + eta_axes
    kr = len(rho_axes)
    index_list = list(itertools.product(*[range(len(a)) for a in axes]))
    origin = tuple(int(np.argmin(np.abs(a))) for a in axes)
    # visit nodes outward from the base so each has a solved neighbour
    index_list.sort(key=lambda ix: sum(abs(i - o) for i, o in zip(ix, origin)))
    solved: dict = {}
    nodes = {}
    for ix in index_list:
        coords = np.array([axes[d][i] for d, i in enumerate(ix)])
        rc, ec = coords[:kr], coords[kr:]
        rho = base.rho + (Bm @ rc if Bm.size else 0.0)
        eta = base.eta + (Bz @ ec if Bz.size else 0.0)
        # warm start from the nearest solved neighbour
        warm = base.v
        best = None
        for jx, pt in solved.items():
            dist = sum(abs(a - b) for a, b in zip(ix, jx))
            if best is None or dist < best:
                best, warm = dist, pt.v
        node = BranchNode(ix, rc, ec, None)
        try:
            pt = solve_re(m, (rho, eta, warm), Kg)
            solved[ix] = pt
            _, _, _, Hn = hbar_eta_derivs(m, eta, rho, pt.v)
            node.point = pt
            node.jy = momentum_map_Y(m, m.group().identity(), rho, pt.v)
            node.eig_fixed = np.linalg.eigvalsh(BN.T @ Hn @ BN) if BN.size else np.zeros(0)
            node.eig_full = np.linalg.eigvalsh(Hn) if Hn.size else np.zeros(0)
            node.stabilizer_dim = stabilizer_dim(m, rho, pt.v)
            node.K_fixes = fixes_point(m, Kg, rho, pt.v)
        except HypothesisError:
            raise
        except (SingularJacobianError, ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
            node.error = str(exc)
        nodes[ix] = node
    ordered = [nodes[ix] for ix in sorted(nodes)]
    stab = {n.stabilizer_dim for n in ordered if n.converged}
    flags = {"holes": sum(not n.converged for n in ordered),
             "same_symplectic_type": len(stab) <= 1}
    return Branch(Kg.name, rho_axes, eta_axes, Bm, Bz, ordered, flags)


def _orbit_tangent_basis(m: LocalModel) -> np.ndarray:
    """Basis of m + q, a complement of g_z in g."""
    return np.hstack([m.splitting.m, m.splitting.q])


def orbit_type_branch(m: LocalModel, base: REPoint, rho_axis=None) -> Branch:
    """Continue with K = G_z over (m*)^{G_z} and record the restricted symplectic form.

    The branch is a manifold of dimension dim(m + q) + dim (m*)^{G_z}; the
    determinant of omega_Y restricted to the tangent directions
    (group directions in m + q) x (branch directions in (m*)^{G_z}) is stored per node.
    """
    alg = m.alg
    ad_rep = lie.GroupRepOnSpace(alg.dim, tuple(alg.ad(m.splitting.gz[:, i]) for i in range(m.dim_gz)))
    lie_l = lie.normalizer_algebra(alg, ad_rep, m.splitting.gz)
    m_fixed = lie_l[:, m.dim_gz:]
    if not lie.bracket_closes_in(alg, m_fixed, m.splitting.gz):
        raise HypothesisError("abelian-normalizer", "the normaliser quotient is not Abelian")
    Bm, _, _ = fixed_spaces(m, "Gz")
    k = Bm.shape[1]
    rho_axes = [np.asarray(rho_axis, float)] * k if (k and rho_axis is not None) else None
    branch = continue_branch(m, base, "Gz", rho_axes, None)
    T = _orbit_tangent_basis(m)
    dim_branch = T.shape[1] + k
    dets = []
    h = 1e-6
    for node in branch.nodes:
        if not node.converged:
            dets.append(float("nan"))
            continue
        pt = node.point
        tangents = [(T[:, i], np.zeros(m.dim_mstar), np.zeros(m.N_dim)) for i in range(T.shape[1])]
        for j in range(k):
            # branch tangent: rho moves along Bm[:, j]; v follows the branch (central difference)
            vp = solve_re(m, (pt.rho + h * Bm[:, j], pt.eta, pt.v), "Gz").v
            vm = solve_re(m, (pt.rho - h * Bm[:, j], pt.eta, pt.v), "Gz").v
            tangents.append((np.zeros(alg.dim), Bm[:, j], (vp - vm) / (2 * h)))
        W = np.array([[eval_omega_Y(m, (pt.rho, pt.v), a, b) for b in tangents] for a in tangents])
        dets.append(float(np.linalg.det(W)) if W.size else 1.0)
    branch.flags.update(dimension=dim_branch, symplectic_det=dets,
                        empty_chart=(k == 0),
                        symplectic=bool(all(np.isfinite(d) and abs(d) > 1e-12 for d in dets)),
                        fully_fixed_m=bool(m_fixed.shape[1] == m.splitting.m.shape[1]))
    return branch


# ---------------------------------------------------------------------- momentum persistence

def _orbit_kind(m: LocalModel) -> str:
    gmu = m.splitting.gmu
    if gmu.shape[1] == 0 or lie.bracket_closes_in(m.alg, gmu, np.zeros((m.alg.dim, 0))):
        return "point"
    if m.alg.dim == 3 and gmu.shape[1] == 3:
        return "sphere"
    raise NotImplementedError("coadjoint orbits are supported for tori and SO(3) only")


def _start_v(m: LocalModel, v0, target, rng) -> np.ndarray:
    """Starting slice vector for the constrained descent.

    J_N is quadratic, so its gradient vanishes at v = 0 and a descent started
    there never leaves it.  A random direction with the sign pattern of the
    target is scaled so that J_N matches the target in its first component.
    """
    v0 = np.asarray(v0, float).copy()
    if not m.N_dim or not m.dim_gz or np.linalg.norm(target) == 0.0 or np.linalg.norm(v0) > 0.0:
        return v0
    i = int(np.argmax(np.abs(target)))
    for _ in range(200):
        d = rng.standard_normal(m.N_dim)
        j = 0.5 * d @ m.Q[i] @ d
        if j * target[i] > 0:
            return d * np.sqrt(target[i] / j)
    raise HypothesisError("momentum", "the requested isotropy momentum is not attained by J_N")


def _onto_level(m: LocalModel, v, target, fallback) -> np.ndarray:
    """Rescale v so that J_N(v) matches the target; a collapsed v is replaced by ``fallback``."""
    if not m.dim_gz or not m.N_dim or np.linalg.norm(target) == 0.0:
        return v
    i = int(np.argmax(np.abs(target)))
    j = 0.5 * v @ m.Q[i] @ v
    if j * target[i] <= 0 or abs(j) < 1e-6 * abs(target[i]):
        v, j = fallback, 0.5 * fallback @ m.Q[i] @ fallback
    return v * np.sqrt(target[i] / j) if j * target[i] > 0 else v


def persist_to_momentum(m: LocalModel, base: REPoint, rho_bar=None, eps_bar=None, gamma=None,
                        certificate=None, max_iter: int = 500, tol: float = 1e-8,
                        seed: int = 0) -> REPoint:
    """Relative equilibrium with momentum mu + rho_bar + eps_bar near the base point.

    Uses the constrained critical point problem: extremise
    f(alpha, v) = hbar_gamma(alpha|m, v) over alpha on the coadjoint orbit of
    rho_bar + eps_bar and v in N, subject to J_N(v) = alpha|g_z.  A projected
    gradient method with augmented-Lagrangian multiplier updates locates the
    point, then Gauss-Newton polishes the full set of equations.
    """
    from .pencil import Verdict, certify_definite
    rho_bar = np.zeros(m.dim_mstar) if rho_bar is None else np.atleast_1d(np.asarray(rho_bar, float))
    eps_bar = np.zeros(m.dim_gz) if eps_bar is None else np.atleast_1d(np.asarray(eps_bar, float))
    sp = m.splitting
    if certificate is None:
        _, _, _, H = hbar_eta_derivs(m, base.eta, base.rho, base.v)
        certificate = certify_definite(HessianPencil(H + sum((e * q for e, q in zip(base.eta, m.Q)),
                                                             np.zeros_like(H)), m.Q), seed=seed)
    if m.N_dim and certificate.verdict not in (Verdict.POSITIVE, Verdict.NEGATIVE):
        raise HypothesisError("formal-stability", "base point is not certified formally stable")
    gamma = np.atleast_1d(np.asarray(certificate.eta_star if gamma is None else gamma, float))
    sign = -1.0 if certificate.verdict == Verdict.NEGATIVE else 1.0
    if not m.N_dim:
        gamma = base.eta.copy()

    nu = np.zeros(m.alg.dim)
    if m.dim_mstar:
        nu += sp.embed_dual(base.rho + rho_bar, "m")
    if m.dim_gz:
        nu += sp.embed_dual(momentum_map_N(m, base.v) + eps_bar, "gz")
    kind = _orbit_kind(m)
    R = float(np.linalg.norm(nu))

    def split_alpha(alpha):
        rho = sp.dual_coords(alpha, "m") if m.dim_mstar else np.zeros(0)
        a_z = sp.dual_coords(alpha, "gz") if m.dim_gz else np.zeros(0)
        return rho, a_z

    def project(alpha):
        if kind == "point" or R == 0.0:
            return nu.copy()
        n = np.linalg.norm(alpha)
        return alpha * (R / n) if n > 0 else nu.copy()

    def f_grad(alpha, v, lam, c):
        rho, a_z = split_alpha(alpha)
        val, g_rho, g_v, _ = hbar_eta_derivs(m, gamma, rho, v, need_hess=False)
        phi = momentum_map_N(m, v) - a_z if m.dim_gz else np.zeros(0)
        Qv = np.array([q @ v for q in m.Q]) if m.dim_gz else np.zeros((0, m.N_dim))
        mult = -lam + c * phi
        grad_v = sign * g_v + (Qv.T @ mult if m.dim_gz else 0.0)
        grad_a = np.zeros(m.alg.dim)
        if m.dim_mstar:
            grad_a += sign * (sp.m @ g_rho)
        if m.dim_gz:
            grad_a += sp.gz @ (-mult)
        L = sign * val - lam @ phi + 0.5 * c * phi @ phi
        return L, grad_a, grad_v, phi

    step = 0.1 / max(1.0, max([np.linalg.norm(q, 2) for q in m.Q] + [1.0]))

    def descend(alpha, v):
        """Projected gradient warm start; returns (alpha, v, multiplier, iterations)."""
        lam = np.zeros(m.dim_gz)
        c = 10.0
        t_prev = step
        it = 0
        for it in range(max_iter):
            L, ga, gv, phi = f_grad(alpha, v, lam, c)
            if kind == "sphere" and R > 0:
                ga = ga - (ga @ alpha) / (R * R) * alpha
            elif kind == "point":
                ga = np.zeros_like(ga)
            if np.sqrt(ga @ ga + gv @ gv) < 1e-10 and np.linalg.norm(phi) < 1e-10:
                break
            # start from twice the last accepted step so stiff problems do not backtrack every time
            t = min(2.0 * t_prev, 1e3 * step)
            while True:
                a_new = project(alpha - t * ga)
                v_new = v - t * gv
                L_new = f_grad(a_new, v_new, lam, c)[0]
                if L_new <= L - 1e-4 * t * (ga @ ga + gv @ gv) or t < 1e-12:
                    break
                t *= 0.5
            t_prev = t
            alpha, v = a_new, v_new
            if it % 50 == 49:
                lam = lam - c * f_grad(alpha, v, lam, c)[3]
        return alpha, v, lam, it

    def eta_guess(alpha, v, lam):
        """Least-squares fit of D_N hbar(rho, v) = sum eta_i Q_i v, else the multiplier estimate."""
        if not m.dim_gz:
            return np.zeros(0)
        Qv = np.column_stack([q @ v for q in m.Q]) if m.N_dim else np.zeros((0, m.dim_gz))
        if Qv.size and np.linalg.norm(Qv) > 1e-12:
            g_v = hbar_derivs(m, split_alpha(alpha)[0], v, need_hess=False)[2]
            return np.linalg.lstsq(Qv, g_v, rcond=None)[0]
        return gamma + sign * lam

    def residual(x):
        a = x[: m.alg.dim]
        vv = x[m.alg.dim: m.alg.dim + m.N_dim]
        e = x[m.alg.dim + m.N_dim:]
        rho, a_z = split_alpha(a)
        r1, r2 = re_residual(m, rho, e, vv)
        xi = velocity(m, rho, vv, e)
        full = lie.coad(m.alg, xi, a)
        gmu_part = full @ sp.gmu
        out = [gmu_part, r2]
        if m.dim_gz:
            out.append(momentum_map_N(m, vv) - a_z)
        if kind == "sphere":
            out.append(np.array([a @ a - R * R]))
        else:
            out.append(a - nu)
        return np.concatenate(out)

    rng = np.random.default_rng(seed)
    v_start = _start_v(m, base.v, eps_bar, rng)
    best = None
    for attempt in range(RESTARTS):
        if attempt:
            # quadratic momentum maps admit several critical levels; try other directions
            v_start = _start_v(m, np.zeros(m.N_dim), eps_bar, rng) if np.linalg.norm(eps_bar) else base.v
        alpha, v, lam, it = descend(project(nu), v_start.copy())
        v = _onto_level(m, v, split_alpha(alpha)[1], v_start)
        x = np.concatenate([alpha, v, eta_guess(alpha, v, lam)])
        if np.linalg.norm(residual(x)) > 1e-14:
            x = least_squares(residual, x, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                              max_nfev=2000).x
        res = float(np.linalg.norm(residual(x)))
        if best is None or res < best[0]:
            best = (res, x, it)
        if res <= tol:
            break
    full_res, x, it = best
    alpha = x[: m.alg.dim]
    v = x[m.alg.dim: m.alg.dim + m.N_dim]
    eta = x[m.alg.dim + m.N_dim:]
    rho, _ = split_alpha(alpha)
    point = make_point(m, rho, eta, v, it)
    if point.r1 > tol or point.r2 > tol or full_res > tol:
        raise ConvergenceError(f"no relative equilibrium with the requested momentum found: "
                               f"r1={point.r1:.2e}, r2={point.r2:.2e}, momentum residual={full_res:.2e}")
    point.converged = True
    return point
