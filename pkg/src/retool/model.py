"""Local slice model of a symmetric Hamiltonian system near a relative equilibrium.

A model bundles a Lie algebra with its splitting g = g_z + m + q, a momentum
value mu in g*, a symplectic vector space (N, Omega) carrying a linear
Hamiltonian action of G_z, and an invariant Hamiltonian hbar(rho, v) on
m* x N.

Conventions
-----------
* Omega(a, b) = a @ Omega @ b.
* The i-th slice momentum component is J_N(v)_i = 1/2 Omega(A_i v, v), whose
  Hessian is the symmetric matrix Q_i = A_i^T Omega.
* Omega-sharp is Omega^{-T}, so that Omega(Omega-sharp(alpha), .) = alpha.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import lie
from .lie import GroupRepOnSpace, LieAlgebraSpec, SplittingData
from .pencil import HessianPencil

EPS = np.finfo(float).eps


class Hamiltonian:
    """Base class for hbar(rho, v).  Subclasses may override ``grad`` and ``hess_v``."""

    analytic_grad = False
    analytic_hess = False

    def value(self, rho: np.ndarray, v: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, rho, v):
        raise NotImplementedError

    def hess_v(self, rho, v):
        raise NotImplementedError

    def describe(self) -> dict:
        return {"custom": type(self).__name__}


class CallableHamiltonian(Hamiltonian):
    def __init__(self, fun: Callable, grad: Callable | None = None, hess_v: Callable | None = None):
        self._fun, self._grad, self._hess = fun, grad, hess_v
        self.analytic_grad = grad is not None
        self.analytic_hess = hess_v is not None

    def value(self, rho, v):
        return float(self._fun(rho, v))

    def grad(self, rho, v):
        return self._grad(rho, v)

    def hess_v(self, rho, v):
        return self._hess(rho, v)


class PolyHamiltonian(Hamiltonian):
    """Polynomial in the concatenated coordinates x = (rho, v).

    Terms are ``{"coef": c, "powers": [p_1, ..., p_n]}``.
    """

    analytic_grad = True
    analytic_hess = True

    def __init__(self, terms, n_rho: int, n_v: int):
        self.n_rho, self.n_v = n_rho, n_v
        self.terms = []
        for t in terms:
            powers = np.asarray(t["powers"], dtype=int)
            if powers.shape != (n_rho + n_v,) or np.any(powers < 0):
                raise ValueError(f"hamiltonian.poly: term powers must be {n_rho + n_v} non-negative integers")
            self.terms.append((float(t["coef"]), powers))

    def _x(self, rho, v):
        return np.concatenate([np.asarray(rho, float).ravel(), np.asarray(v, float).ravel()])

    def value(self, rho, v):
        x = self._x(rho, v)
        return float(sum(c * np.prod(x ** p) for c, p in self.terms))

    def _full_grad(self, x):
        g = np.zeros_like(x)
        for c, p in self.terms:
            for i in np.nonzero(p)[0]:
                q = p.copy()
                q[i] -= 1
                g[i] += c * p[i] * np.prod(x ** q)
        return g

    def grad(self, rho, v):
        g = self._full_grad(self._x(rho, v))
        return g[: self.n_rho], g[self.n_rho:]

    def hess_v(self, rho, v):
        x = self._x(rho, v)
        n = x.size
        H = np.zeros((n, n))
        for c, p in self.terms:
            for i in np.nonzero(p)[0]:
                for j in np.nonzero(p)[0]:
                    q = p.copy()
                    q[i] -= 1
                    coef = p[i]
                    if q[j] == 0:
                        continue
                    coef *= q[j]
                    q[j] -= 1
                    H[i, j] += c * coef * np.prod(x ** q)
        return H[self.n_rho:, self.n_rho:]

    def describe(self):
        return {"poly": [{"coef": c, "powers": p.tolist()} for c, p in self.terms]}


@dataclass(frozen=True)
class FiniteElement:
    """A group element of finite order acting on m*, N and g_z (orthogonal matrices)."""

    mstar: np.ndarray
    N: np.ndarray
    gz: np.ndarray


@dataclass(frozen=True)
class Subgroup:
    """Closed subgroup K of G_z: a continuous part (g_z directions) plus finite generators."""

    name: str
    directions: np.ndarray  # rows are g_z coordinate vectors
    finite: tuple = ()


@dataclass(frozen=True)
class LocalModel:
    alg: LieAlgebraSpec
    splitting: SplittingData
    mu: np.ndarray
    Omega: np.ndarray
    rep: GroupRepOnSpace
    hamiltonian: Hamiltonian
    subgroups: dict = field(default_factory=dict)
    name: str = "custom"
    params: dict = field(default_factory=dict)
    group_kind: str | None = None
    notes: tuple = ()

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.shape != (self.alg.dim,):
            raise ValueError("mu: wrong length")
        object.__setattr__(self, "mu", mu)
        Om = np.asarray(self.Omega, dtype=float).reshape(self.rep.dim, self.rep.dim)
        object.__setattr__(self, "Omega", Om)
        n = Om.shape[0]
        if n % 2:
            raise ValueError("omega: N must be even-dimensional")
        if n:
            scale = max(1.0, np.abs(Om).max())
            if np.abs(Om + Om.T).max() > 1e-12 * scale:
                raise ValueError("omega: not antisymmetric")
            if abs(np.linalg.det(Om / scale)) <= 1e-12:
                raise ValueError("omega: degenerate")
        if len(self.rep.infinitesimal) != self.splitting.dims[0]:
            raise ValueError("generators: need one infinitesimal generator per g_z basis vector")
        for A in self.rep.infinitesimal:
            if n and np.abs(A.T @ Om + Om @ A).max() > 1e-10 * max(1.0, np.abs(Om).max()):
                raise ValueError("generators: action on N is not Hamiltonian for omega")
        if self.splitting.invariance_residual(self.alg) > 1e-10:
            raise ValueError("splitting: not invariant under g_z")
        subs = dict(self.subgroups)
        kz = self.splitting.dims[0]
        subs.setdefault("e", Subgroup("e", np.zeros((0, kz))))
        subs.setdefault("Gz", Subgroup("Gz", np.eye(kz)))
        object.__setattr__(self, "subgroups", subs)

    # -- dimensions
    @property
    def N_dim(self) -> int:
        return self.Omega.shape[0]

    @property
    def dim_mstar(self) -> int:
        return self.splitting.dims[1]

    @property
    def dim_gz(self) -> int:
        return self.splitting.dims[0]

    @property
    def Omega_sharp(self) -> np.ndarray:
        return np.linalg.inv(self.Omega.T) if self.N_dim else np.zeros((0, 0))

    @property
    def Q(self) -> tuple:
        """Hessians D^2 J_N^{e_i}(0), one per g_z basis vector."""
        return tuple(0.5 * ((A.T @ self.Omega) + (A.T @ self.Omega).T) for A in self.rep.infinitesimal)

    def group(self) -> lie.GroupRealization:
        return lie.group_for(self.alg, self.group_kind)

    def check_dims(self, rho=None, v=None, eta=None):
        out = []
        for x, n, what in ((rho, self.dim_mstar, "rho"), (v, self.N_dim, "v"), (eta, self.dim_gz, "eta")):
            if x is None:
                continue
            x = np.atleast_1d(np.asarray(x, dtype=float)) if n else np.zeros(0)
            if x.shape != (n,):
                raise ValueError(f"{what} must have length {n}, got shape {x.shape}")
            out.append(x)
        return out

    # -- serialisation
    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "algebra": self.alg.to_dict(),
            "splitting": self.splitting.to_dict(),
            "mu": self.mu.tolist(),
            "dim_mstar": self.dim_mstar,
            "N_dim": self.N_dim,
            "omega": self.Omega.tolist(),
            "generators": {
                "infinitesimal": [a.tolist() for a in self.rep.infinitesimal],
                "finite": [r.tolist() for r in self.rep.finite],
            },
            "subgroups": {
                k: {"directions": s.directions.tolist(),
                    "finite": [{"mstar": f.mstar.tolist(), "N": f.N.tolist(), "gz": f.gz.tolist()}
                               for f in s.finite]}
                for k, s in self.subgroups.items()
            },
            "group": self.group_kind,
            "hamiltonian": self.hamiltonian.describe(),
        }
        if "builtin" in d["hamiltonian"]:
            d["hamiltonian"]["params"] = dict(self.params)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def model_from_dict(d: dict) -> LocalModel:
    """Build a model from its JSON form; errors name the offending field."""
    if not isinstance(d, dict):
        raise ValueError("model: expected a JSON object")
    ham = d.get("hamiltonian")
    if ham is None:
        raise ValueError("model: missing field 'hamiltonian'")
    if "builtin" in ham:
        from .examples import builtin_model
        return builtin_model(ham["builtin"], ham.get("params", {}))
    for key in ("algebra", "mu", "N_dim", "omega", "generators"):
        if key not in d:
            raise ValueError(f"model: missing field '{key}'")
    alg_d = d["algebra"]
    alg = lie.builtin_algebra(alg_d) if isinstance(alg_d, str) else LieAlgebraSpec.from_dict(alg_d)
    if "splitting" in d:
        split = SplittingData.from_dict(d["splitting"], alg.dim)
    else:
        raise ValueError("model: missing field 'splitting'")
    if "dim_mstar" in d and int(d["dim_mstar"]) != split.dims[1]:
        raise ValueError("model: field 'dim_mstar' disagrees with 'splitting'")
    n = int(d["N_dim"])
    gens = d["generators"]
    rep = GroupRepOnSpace(n, tuple(np.asarray(a, float) for a in gens.get("infinitesimal", [])),
                          tuple(np.asarray(r, float) for r in gens.get("finite", [])))
    if "poly" in ham:
        h = PolyHamiltonian(ham["poly"], split.dims[1], n)
    else:
        raise ValueError("model: field 'hamiltonian' needs 'builtin' or 'poly'")
    subs = {}
    for k, s in d.get("subgroups", {}).items():
        fin = tuple(FiniteElement(np.asarray(f["mstar"], float).reshape(split.dims[1], split.dims[1]),
                                  np.asarray(f["N"], float).reshape(n, n),
                                  np.asarray(f["gz"], float).reshape(split.dims[0], split.dims[0]))
                    for f in s.get("finite", []))
        subs[k] = Subgroup(k, np.asarray(s.get("directions", []), float).reshape(-1, split.dims[0]), fin)
    return LocalModel(alg, split, np.asarray(d["mu"], float), np.asarray(d["omega"], float).reshape(n, n),
                      rep, h, subs, d.get("name", "custom"), {}, d.get("group"))


# ---------------------------------------------------------------- momentum maps

def momentum_map_N(m: LocalModel, v) -> np.ndarray:
    """J_N(v) in g_z* coordinates: 1/2 Omega(A_i v, v)."""
    (v,) = m.check_dims(v=v)
    return np.array([0.5 * (A @ v) @ m.Omega @ v for A in m.rep.infinitesimal])


def tangent_momentum_N(m: LocalModel, v, vdot) -> np.ndarray:
    """Derivative of J_N at v applied to vdot."""
    v, vdot = m.check_dims(v=v)[0], m.check_dims(v=vdot)[0]
    return np.array([v @ q @ vdot for q in m.Q])


def alpha_of(m: LocalModel, rho, v) -> np.ndarray:
    """rho + J_N(v) embedded in g*."""
    rho, v = m.check_dims(rho=rho, v=v)
    out = np.zeros(m.alg.dim)
    if m.dim_mstar:
        out += m.splitting.embed_dual(rho, "m")
    if m.dim_gz:
        out += m.splitting.embed_dual(momentum_map_N(m, v), "gz")
    return out


def momentum_map_Y(m: LocalModel, g, rho, v) -> np.ndarray:
    """J_Y([g, rho, v]) = Ad*_{g^-1}(mu + rho + J_N(v))."""
    return m.group().coadjoint(g, m.mu + alpha_of(m, rho, v))


# ---------------------------------------------------------------- derivatives

def _fd_grad(fun, x):
    g = np.zeros_like(x)
    for i in range(x.size):
        h = EPS ** (1 / 3) * (1.0 + abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def _fd_hess(fun, x):
    n = x.size
    H = np.zeros((n, n))
    hs = EPS ** 0.25 * (1.0 + np.abs(x))
    f0 = fun(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = hs[i]
        H[i, i] = (fun(x + ei) - 2 * f0 + fun(x - ei)) / hs[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = hs[j]
            H[i, j] = H[j, i] = (fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej)
                                 + fun(x - ei - ej)) / (4 * hs[i] * hs[j])
    return H


def hbar_derivs(m: LocalModel, rho, v, need_hess: bool = True):
    """(value, D_rho hbar, D_N hbar, D^2_N hbar) of hbar itself."""
    rho, v = m.check_dims(rho=rho, v=v)
    h = m.hamiltonian
    val = h.value(rho, v)
    if not np.isfinite(val):
        raise FloatingPointError("hamiltonian value is not finite")
    if h.analytic_grad:
        g_rho, g_v = (np.asarray(a, float) for a in h.grad(rho, v))
    else:
        nr = rho.size
        full = _fd_grad(lambda x: h.value(x[:nr], x[nr:]), np.concatenate([rho, v]))
        g_rho, g_v = full[:nr], full[nr:]
    H = None
    if need_hess:
        if h.analytic_hess:
            H = np.asarray(h.hess_v(rho, v), float)
        elif h.analytic_grad:
            H = np.zeros((v.size, v.size))
            for i in range(v.size):
                step = EPS ** (1 / 3) * (1.0 + abs(v[i]))
                e = np.zeros(v.size)
                e[i] = step
                H[:, i] = (np.asarray(h.grad(rho, v + e)[1]) - np.asarray(h.grad(rho, v - e)[1])) / (2 * step)
        else:
            H = _fd_hess(lambda x: h.value(rho, x), v) if v.size else np.zeros((0, 0))
        H = 0.5 * (H + H.T)
    return val, g_rho, g_v, H


def hbar_eta_derivs(m: LocalModel, eta, rho, v, need_hess: bool = True):
    """(value, D_m*, D_N, D^2_N) of hbar_eta = hbar - J_N^eta."""
    (eta,) = m.check_dims(eta=eta)
    rho, v = m.check_dims(rho=rho, v=v)
    val, g_rho, g_v, H = hbar_derivs(m, rho, v, need_hess)
    Qeta = sum((e * q for e, q in zip(eta, m.Q)), np.zeros((m.N_dim, m.N_dim)))
    val -= float(eta @ momentum_map_N(m, v)) if m.dim_gz else 0.0
    g_v = g_v - Qeta @ v
    if H is not None:
        H = H - Qeta
    return val, g_rho, g_v, H


def velocity(m: LocalModel, rho, v, eta) -> np.ndarray:
    """xi = D_m* hbar(rho, v) + eta, in algebra coordinates."""
    (eta,) = m.check_dims(eta=eta)
    _, g_rho, _, _ = hbar_derivs(m, rho, v, need_hess=False)
    xi = np.zeros(m.alg.dim)
    if m.dim_mstar:
        xi += m.splitting.embed(g_rho, "m")
    if m.dim_gz:
        xi += m.splitting.embed(eta, "gz")
    return xi


def slice_pencil(m: LocalModel, rho=None, v=None, subspace=None) -> HessianPencil:
    """Pencil eta -> D^2_N hbar_eta(rho, v)."""
    rho = np.zeros(m.dim_mstar) if rho is None else rho
    v = np.zeros(m.N_dim) if v is None else v
    _, _, _, H = hbar_derivs(m, rho, v)
    return HessianPencil(H, m.Q, subspace)


def eval_omega_Y(m: LocalModel, point, t1, t2) -> float:
    """Local symplectic form on G x m* x N at g = identity.

    ``point`` is (rho, v); tangents are (lambda in g, rho-dot in m*, v-dot in N).
    """
    rho, v = m.check_dims(rho=point[0], v=point[1])
    lam1, rd1, vd1 = t1
    lam2, rd2, vd2 = t2
    lam1, lam2 = m.alg._vec(lam1), m.alg._vec(lam2)
    rd1, vd1 = m.check_dims(rho=rd1, v=vd1)
    rd2, vd2 = m.check_dims(rho=rd2, v=vd2)

    def dual(rd, vd):
        out = np.zeros(m.alg.dim)
        if m.dim_mstar:
            out += m.splitting.embed_dual(rd, "m")
        if m.dim_gz and m.N_dim:
            out += m.splitting.embed_dual(tangent_momentum_N(m, v, vd), "gz")
        return out

    total = dual(rd2, vd2) @ lam1 - dual(rd1, vd1) @ lam2
    total += (m.mu + alpha_of(m, rho, v)) @ lie.lie_bracket(m.alg, lam1, lam2)
    if m.N_dim:
        total += vd1 @ m.Omega @ vd2
    return float(total)


# ---------------------------------------------------------------- subgroup actions

def mstar_generator(m: LocalModel, zeta_coords) -> np.ndarray:
    """Matrix of the infinitesimal coadjoint action of zeta in g_z on m* coordinates."""
    zeta = m.splitting.embed(zeta_coords, "gz")
    k = m.dim_mstar
    M = np.zeros((k, k))
    for j in range(k):
        e = np.zeros(k)
        e[j] = 1.0
        M[:, j] = -m.splitting.dual_coords(lie.coad(m.alg, zeta, m.splitting.embed_dual(e, "m")), "m")
    return M


def gz_generator(m: LocalModel, zeta_coords) -> np.ndarray:
    zeta = m.splitting.embed(zeta_coords, "gz")
    ad = m.alg.ad(zeta)
    return m.splitting.dual_basis[m.splitting._block("gz")] @ ad @ m.splitting.gz


def N_generator(m: LocalModel, zeta_coords) -> np.ndarray:
    zeta_coords = np.asarray(zeta_coords, float)
    return sum((z * A for z, A in zip(zeta_coords, m.rep.infinitesimal)), np.zeros((m.N_dim, m.N_dim)))


def subgroup(m: LocalModel, K) -> Subgroup:
    if isinstance(K, Subgroup):
        return K
    if K is None:
        return m.subgroups["e"]
    key = {"S1": "Gz", "G_z": "Gz", "trivial": "e"}.get(K, K)
    if key not in m.subgroups:
        raise ValueError(f"unknown subgroup '{K}' (available: {sorted(m.subgroups)})")
    return m.subgroups[key]


def subgroup_reps(m: LocalModel, K) -> tuple:
    """Representations of K on m*, N and g_z."""
    K = subgroup(m, K)
    dirs = list(K.directions)
    rep_m = GroupRepOnSpace(m.dim_mstar, tuple(mstar_generator(m, z) for z in dirs),
                            tuple(f.mstar for f in K.finite))
    rep_N = GroupRepOnSpace(m.N_dim, tuple(N_generator(m, z) for z in dirs), tuple(f.N for f in K.finite))
    rep_z = GroupRepOnSpace(m.dim_gz, tuple(gz_generator(m, z) for z in dirs), tuple(f.gz for f in K.finite))
    return rep_m, rep_N, rep_z


def fixed_spaces(m: LocalModel, K) -> tuple:
    """Orthonormal bases of (m*)^K, N^K and (g_z)^K."""
    return tuple(lie.fixed_subspace(r) if r.dim else np.zeros((0, 0)) for r in subgroup_reps(m, K))


def fixes_point(m: LocalModel, K, rho, v, tol: float = 1e-9) -> bool:
    rep_m, rep_N, _ = subgroup_reps(m, K)
    rho, v = m.check_dims(rho=rho, v=v)
    for A in rep_m.infinitesimal:
        if np.linalg.norm(A @ rho) > tol:
            return False
    for R in rep_m.finite:
        if np.linalg.norm(R @ rho - rho) > tol:
            return False
    for A in rep_N.infinitesimal:
        if np.linalg.norm(A @ v) > tol:
            return False
    for R in rep_N.finite:
        if np.linalg.norm(R @ v - v) > tol:
            return False
    return True


def stabilizer_dim(m: LocalModel, rho, v, tol: float = 1e-9) -> int:
    """Dimension of the subalgebra of g_z fixing (rho, v)."""
    rho, v = m.check_dims(rho=rho, v=v)
    cols = []
    for i in range(m.dim_gz):
        e = np.zeros(m.dim_gz)
        e[i] = 1.0
        cols.append(np.concatenate([mstar_generator(m, e) @ rho, N_generator(m, e) @ v]))
    if not cols:
        return 0
    M = np.column_stack(cols)
    if M.size == 0 or np.abs(M).max() <= tol:
        return m.dim_gz
    s = np.linalg.svd(M, compute_uv=False)
    return int(m.dim_gz - np.sum(s > tol))


def build_vortex_slice(gamma1: float, gamma2: float) -> LocalModel:
    """Slice model of two point vortices at the antipodal pair (e3, -e3)."""
    from .examples import two_vortices
    return two_vortices(gamma1, gamma2)
