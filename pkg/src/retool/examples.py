"""Built-in models: the sleeping Lagrange top, two point vortices on the sphere,
and a small SO(3) x S^1 model whose velocity-optimised test succeeds where the
fixed-velocity test fails.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import lie
from .lie import GroupRepOnSpace, SplittingData
from .model import FiniteElement, Hamiltonian, LocalModel, Subgroup
from .pencil import HessianPencil

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


# ====================================================================== top

@dataclass(frozen=True)
class TopParams:
    m: float = 1.0
    g: float = 1.0
    l: float = 1.0
    I1: float = 1.0
    I3: float = 0.5
    lam: float = 5.0

    def __post_init__(self):
        if self.I1 <= 0 or self.I3 <= 0:
            raise ValueError("moments of inertia must be positive")
        for name in ("m", "g", "l", "I1", "I3", "lam"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"parameter '{name}' is not finite")


def top_coefficients(p: TopParams, eta: float, lam: float | None = None) -> tuple:
    lam = p.lam if lam is None else lam
    k = 2 * p.I3 - p.I1
    A = -p.m * p.g * p.l - lam**2 * p.I3 * k / (2 * p.I1) - eta * lam * p.I3
    B = lam * k / (2 * p.I1) - eta
    C = 1.0 / p.I1
    return A, B, C


def _top_matrix(A, B, C) -> np.ndarray:
    return np.array([[A, 0, 0, B], [0, A, -B, 0], [0, -B, C, 0], [B, 0, 0, C]], dtype=float)


def lagrange_top_hessian(p: TopParams, eta: float, lam: float | None = None):
    """Slice Hessian of the augmented energy for the sleeping top, with (A, B, C)."""
    A, B, C = top_coefficients(p, eta, lam)
    return _top_matrix(A, B, C), (A, B, C)


def top_sigma(A, B, C) -> tuple:
    """Closed-form eigenvalues (each of multiplicity two) of the top Hessian."""
    tr, det = A + C, A * C - B * B
    disc = np.sqrt(tr * tr - 4 * det)
    return 0.5 * (tr - disc), 0.5 * (tr + disc)


def top_momentum_form(p: TopParams, lam: float | None = None) -> np.ndarray:
    """-dH/deta for the top family."""
    lam = p.lam if lam is None else lam
    a = lam * p.I3
    return np.array([[a, 0, 0, 1], [0, a, -1, 0], [0, -1, 0, 0], [1, 0, 0, 0]], dtype=float)


def lagrange_top_pencil(p: TopParams, lam: float | None = None) -> HessianPencil:
    H0, _ = lagrange_top_hessian(p, 0.0, lam)
    return HessianPencil(H0, (top_momentum_form(p, lam),))


def fast_top_threshold(p: TopParams) -> tuple:
    """(lambda*^2, optimal eta/lambda) of the classical fast-top condition."""
    return 4 * p.g * p.l * p.m * p.I1 / p.I3**2, (p.I3 - p.I1) / (2 * p.I1)


class TopHamiltonian(Hamiltonian):
    """Slice energy of the sleeping top, using the spin offset rho as the m* coordinate.

    hbar(rho, v) = (lam0 I3 + rho)^2 / (2 I3) + 1/2 v.H(0; lam0 + rho/I3).v + quartic |v|^4 / 4
    """

    analytic_grad = True
    analytic_hess = True

    def __init__(self, p: TopParams, quartic: float = 0.0):
        self.p, self.quartic = p, quartic

    def _spin(self, rho):
        return self.p.lam + rho[0] / self.p.I3

    def value(self, rho, v):
        H0, _ = lagrange_top_hessian(self.p, 0.0, self._spin(rho))
        q = v @ v
        return float((self.p.lam * self.p.I3 + rho[0]) ** 2 / (2 * self.p.I3) + 0.5 * v @ H0 @ v
                     + 0.25 * self.quartic * q * q)

    def grad(self, rho, v):
        p = self.p
        lam = self._spin(rho)
        H0, _ = lagrange_top_hessian(p, 0.0, lam)
        k = 2 * p.I3 - p.I1
        dA = -lam * p.I3 * k / p.I1
        dB = k / (2 * p.I1)
        dH = _top_matrix(dA, dB, 0.0)
        g_rho = (p.lam * p.I3 + rho[0]) / p.I3 + 0.5 * (v @ dH @ v) / p.I3
        g_v = H0 @ v + self.quartic * (v @ v) * v
        return np.array([g_rho]), g_v

    def hess_v(self, rho, v):
        H0, _ = lagrange_top_hessian(self.p, 0.0, self._spin(rho))
        return H0 + self.quartic * ((v @ v) * np.eye(4) + 2 * np.outer(v, v))

    def describe(self):
        return {"builtin": "lagrange_top"}


def lagrange_top(p: TopParams | None = None, quartic: float = 0.0) -> LocalModel:
    """Slice model of the sleeping top on the torus T^2 (body and space spin).

    The slice form is Omega = A Q(lam0), with A the circle generator, which makes
    J_N(v) = 1/2 v.Q(lam0).v and so reproduces the pencil of the closed-form family
    at rho = 0.
    """
    p = TopParams() if p is None else p
    alg = lie.t2()
    split = SplittingData(np.array([[1.0], [1.0]]), np.array([[0.5], [-0.5]]), np.zeros((2, 0)))
    mu = np.array([p.lam * p.I3, -p.lam * p.I3])
    A = np.kron(np.eye(2), ROT)
    Q = top_momentum_form(p)
    rep = GroupRepOnSpace(4, (A,))
    subs = {"S1": Subgroup("S1", np.eye(1))}
    return LocalModel(alg, split, mu, A @ Q, rep, TopHamiltonian(p, quartic), subs, "lagrange_top",
                      {"m": p.m, "g": p.g, "l": p.l, "I1": p.I1, "I3": p.I3, "lambda": p.lam,
                       "quartic": quartic}, "torus")


TOP_BLOCK_BASIS = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 1.0]])


# ====================================================================== toy model

class ToyHamiltonian(Hamiltonian):
    """1/2 (x1^2 + y1^2 - x2^2 - y2^2) + c |rho|^2."""

    analytic_grad = True
    analytic_hess = True
    D = np.diag([1.0, 1.0, -1.0, -1.0])

    def __init__(self, c: float = 0.0):
        self.c = c

    def value(self, rho, v):
        return float(0.5 * v @ self.D @ v + self.c * rho @ rho)

    def grad(self, rho, v):
        return 2 * self.c * np.asarray(rho, float), self.D @ v

    def hess_v(self, rho, v):
        return self.D.copy()

    def describe(self):
        return {"builtin": "toy_so3_s1"}


def toy_so3_s1(c: float = 0.0) -> LocalModel:
    """SO(3) model with circle isotropy acting on R^4 by two equal rotations.

    The circle generator is taken with the orientation that makes
    J_N(v) = +1/2 |v|^2 for the slice form below.
    """
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    Omega = np.kron(np.eye(2), J)
    A = np.kron(np.eye(2), J)
    alg = lie.so3()
    split = SplittingData(np.array([[0.0], [0.0], [1.0]]), np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]),
                          np.zeros((3, 0)))
    rep = GroupRepOnSpace(4, (A,))
    subs = {"S1": Subgroup("S1", np.eye(1))}
    return LocalModel(alg, split, np.zeros(3), Omega, rep, ToyHamiltonian(c), subs, "toy_so3_s1",
                      {"c": c}, "so3")


# ====================================================================== vortices

@dataclass(frozen=True)
class VortexParams:
    Gamma1: float = 2.0
    Gamma2: float = 1.0
    theta: float = np.pi

    def __post_init__(self):
        if self.Gamma1 * self.Gamma2 == 0 or not np.isfinite(self.Gamma1 * self.Gamma2):
            raise ValueError("vorticities must be finite and non-zero")
        if not (0 < self.theta <= np.pi):
            raise ValueError("theta must lie in (0, pi]")


def vortex_pair(theta: float) -> tuple:
    """x1 = e3 and x2 at angle theta from it in the x-z plane."""
    return np.array([0.0, 0.0, 1.0]), np.array([np.sin(theta), 0.0, np.cos(theta)])


def vortex_momentum(g1, g2, x1, x2) -> np.ndarray:
    return g1 * np.asarray(x1) + g2 * np.asarray(x2)


def vortex_velocity(p: VortexParams, x1=None, x2=None) -> np.ndarray:
    """Angular velocity of the rigidly rotating pair."""
    if x1 is None or x2 is None:
        x1, x2 = vortex_pair(p.theta)
    x1, x2 = np.asarray(x1, float), np.asarray(x2, float)
    mu = vortex_momentum(p.Gamma1, p.Gamma2, x1, x2)
    cos = float(np.clip(x1 @ x2, -1.0, 1.0))
    if cos <= -1.0 + 1e-15:
        return 0.5 * mu
    return mu / (1.0 - cos)  # 2 sin^2(theta/2) = 1 - cos(theta)


def vortex_rhs(g1, g2, x1, x2) -> tuple:
    d = 1.0 - x1 @ x2
    return g2 * np.cross(x2, x1) / d, g1 * np.cross(x1, x2) / d


def integrate_vortices(g1, g2, x1, x2, t_end: float, dt: float = 1e-4) -> tuple:
    """Classical RK4 for the two-vortex equations of motion."""
    y = np.array([x1, x2], dtype=float).ravel()
    n = max(1, int(round(t_end / dt)))
    h = t_end / n

    def rhs(y):
        a1, a2, a3, b1, b2, b3 = y
        # cross(x2, x1) and its negative, written out to avoid per-call overhead
        c1, c2, c3 = b2 * a3 - b3 * a2, b3 * a1 - b1 * a3, b1 * a2 - b2 * a1
        inv = 1.0 / (1.0 - (a1 * b1 + a2 * b2 + a3 * b3))
        s1, s2 = g2 * inv, -g1 * inv
        return np.array([s1 * c1, s1 * c2, s1 * c3, s2 * c1, s2 * c2, s2 * c3])

    for _ in range(n):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y[:3], y[3:]


class VortexChart:
    """Chart of a neighbourhood of (e3, -e3) in S^2 x S^2 by the slice N = R^2.

    With s = r^2, x1 = (g2 r u, sqrt(1 - g2^2 s)) and x2 = (-g1 r u, -sqrt(1 - g1^2 s)),
    where u = v/|v|.  The radius is chosen so that the vertical momentum
    F(s) = g1 sqrt(1 - g2^2 s) - g2 sqrt(1 - g1^2 s) equals (g1 - g2)(1 + g1 g2 |v|^2 / 2),
    which makes the momentum normal form exact in this chart.
    """

    def __init__(self, g1: float, g2: float):
        self.g1, self.g2 = float(g1), float(g2)
        self.k = 0.5 * (g1 - g2) * g1 * g2
        self.s_max = 1.0 / max(g1 * g1, g2 * g2)

    def _ab(self, s):
        g1, g2 = self.g1, self.g2
        a = np.sqrt(max(1.0 - g2 * g2 * s, 0.0))
        b = np.sqrt(max(1.0 - g1 * g1 * s, 0.0))
        return a, b

    def F(self, s):
        a, b = self._ab(s)
        return self.g1 * a - self.g2 * b

    def dF(self, s):
        a, b = self._ab(s)
        g1, g2 = self.g1, self.g2
        return -g1 * g2 * g2 / (2 * a) + g2 * g1 * g1 / (2 * b)

    def d2F(self, s):
        a, b = self._ab(s)
        g1, g2 = self.g1, self.g2
        return -g1 * g2**4 / (4 * a**3) + g2 * g1**4 / (4 * b**3)

    def s_of_q(self, q: float) -> float:
        if q < 0:
            raise ValueError("q must be non-negative")
        if q == 0:
            return 0.0
        target = (self.g1 - self.g2) * (1.0 + 0.5 * self.g1 * self.g2 * q)
        fun = lambda s: self.F(s) - target  # noqa: E731
        hi = self.s_max * (1 - 1e-14)
        if fun(0.0) * fun(hi) > 0:
            raise ValueError("point lies outside the vortex slice chart")
        s = brentq(fun, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        d = self.dF(s)
        if d != 0 and np.isfinite(d):
            s -= fun(s) / d
        return float(s)

    def D(self, s):
        a, b = self._ab(s)
        return 2 + 2 * self.g1 * self.g2 * s + 2 * a * b

    def phi_derivs(self, q: float) -> tuple:
        """phi(q), phi'(q), phi''(q) for hbar(v) = phi(|v|^2)."""
        g1, g2 = self.g1, self.g2
        s = self.s_of_q(q)
        a, b = self._ab(s)
        da, db = -g2 * g2 / (2 * a), -g1 * g1 / (2 * b)
        dda, ddb = -g2**4 / (4 * a**3), -g1**4 / (4 * b**3)
        D = 2 + 2 * g1 * g2 * s + 2 * a * b
        dD = 2 * g1 * g2 + 2 * (da * b + a * db)
        ddD = 2 * (dda * b + 2 * da * db + a * ddb)
        phi = -g1 * g2 * np.log(D)
        phi_s = -g1 * g2 * dD / D
        phi_ss = -g1 * g2 * (ddD / D - (dD / D) ** 2)
        dF = self.dF(s)
        s1 = self.k / dF
        s2 = -self.d2F(s) * s1 * s1 / dF
        return float(phi), float(phi_s * s1), float(phi_ss * s1 * s1 + phi_s * s2)

    def configuration(self, v) -> tuple:
        v = np.asarray(v, float)
        q = float(v @ v)
        s = self.s_of_q(q)
        a, b = self._ab(s)
        planar = np.sqrt(s / q) * v if q > 0 else np.zeros(2)
        x1 = np.array([self.g2 * planar[0], self.g2 * planar[1], a])
        x2 = np.array([-self.g1 * planar[0], -self.g1 * planar[1], -b])
        return x1, x2


class VortexHamiltonian(Hamiltonian):
    """-g1 g2 log |x1 - x2|^2 pulled back through :class:`VortexChart`."""

    analytic_grad = True
    analytic_hess = True

    def __init__(self, g1, g2):
        self.chart = VortexChart(g1, g2)

    def value(self, rho, v):
        return self.chart.phi_derivs(float(v @ v))[0]

    def grad(self, rho, v):
        _, d1, _ = self.chart.phi_derivs(float(v @ v))
        return np.zeros(0), 2 * d1 * np.asarray(v, float)

    def hess_v(self, rho, v):
        _, d1, d2 = self.chart.phi_derivs(float(v @ v))
        return 2 * d1 * np.eye(2) + 4 * d2 * np.outer(v, v)

    def describe(self):
        return {"builtin": "two_vortices"}


class EqualVortexHamiltonian(Hamiltonian):
    """Equal vorticities: hbar(rho) = -G^2 log(4 - |rho / G|^2), with rho = G (x1 + x2)."""

    analytic_grad = True
    analytic_hess = True

    def __init__(self, gamma):
        self.gamma = float(gamma)

    def value(self, rho, v):
        c = np.asarray(rho, float) / self.gamma
        d = 4.0 - c @ c
        if d <= 0:
            return float("nan")
        return float(-self.gamma**2 * np.log(d))

    def grad(self, rho, v):
        c = np.asarray(rho, float) / self.gamma
        return 2 * np.asarray(rho, float) / (4.0 - c @ c), np.zeros(0)

    def hess_v(self, rho, v):
        return np.zeros((0, 0))

    def describe(self):
        return {"builtin": "two_vortices"}


def two_vortices(gamma1: float = 2.0, gamma2: float = 1.0) -> LocalModel:
    """Slice model of two vortices at an antipodal pair."""
    VortexParams(gamma1, gamma2)
    alg = lie.so3()
    params = {"Gamma1": float(gamma1), "Gamma2": float(gamma2)}
    e1, e2, e3 = np.eye(3)
    if gamma1 != gamma2:
        w = gamma1 * gamma2 * (gamma2 - gamma1)
        Omega = np.array([[0.0, w], [-w, 0.0]])
        split = SplittingData(e3[:, None], np.zeros((3, 0)), np.column_stack([e1, e2]))
        return LocalModel(alg, split, (gamma1 - gamma2) * e3, Omega, GroupRepOnSpace(2, (ROT,)),
                          VortexHamiltonian(gamma1, gamma2), {"S1": Subgroup("S1", np.eye(1))},
                          "two_vortices", params, "so3")
    split = SplittingData(e3[:, None], np.column_stack([e1, e2]), np.zeros((3, 0)))
    flip = FiniteElement(np.diag([1.0, -1.0]), np.zeros((0, 0)), -np.eye(1))
    subs = {"S1": Subgroup("S1", np.eye(1)), "Z2n": Subgroup("Z2n", np.zeros((0, 1)), (flip,))}
    return LocalModel(alg, split, np.zeros(3), np.zeros((0, 0)), GroupRepOnSpace(0, (np.zeros((0, 0)),)),
                      EqualVortexHamiltonian(gamma1), subs, "two_vortices", params, "so3")


def vortex_slice_basis(g1, g2) -> np.ndarray:
    """Columns v1 = (g2, -g1, 0, 0), v2 = (0, 0, g2, -g1) in (x1_x, x2_x, x1_y, x2_y) order."""
    return np.array([[g2, 0.0], [-g1, 0.0], [0.0, g2], [0.0, -g1]])


def vortex_configuration(m: LocalModel, v) -> tuple:
    """Positions (x1, x2) of the pair for slice coordinate v (identity group element)."""
    return m.hamiltonian.chart.configuration(v)


# ====================================================================== registry

BUILTINS = ("lagrange_top", "two_vortices", "toy_so3_s1")

_ALIASES = {"lambda": "lam", "Gamma1": "gamma1", "Gamma2": "gamma2"}


def builtin_model(name: str, params: dict | None = None) -> LocalModel:
    params = dict(params or {})
    for k, v in params.items():
        if not np.isfinite(float(v)):
            raise ValueError(f"parameter '{k}' is not finite")
    if name == "lagrange_top":
        quartic = float(params.pop("quartic", 0.0))
        kw = {_ALIASES.get(k, k): float(v) for k, v in params.items()}
        unknown = set(kw) - {"m", "g", "l", "I1", "I3", "lam"}
        if unknown:
            raise ValueError(f"unknown lagrange_top parameter(s): {sorted(unknown)}")
        return lagrange_top(TopParams(**kw), quartic)
    if name == "two_vortices":
        kw = {_ALIASES.get(k, k): float(v) for k, v in params.items()}
        unknown = set(kw) - {"gamma1", "gamma2"}
        if unknown:
            raise ValueError(f"unknown two_vortices parameter(s): {sorted(unknown)}")
        return two_vortices(kw.get("gamma1", 2.0), kw.get("gamma2", 1.0))
    if name == "toy_so3_s1":
        unknown = set(params) - {"c"}
        if unknown:
            raise ValueError(f"unknown toy_so3_s1 parameter(s): {sorted(unknown)}")
        return toy_so3_s1(float(params.get("c", 0.0)))
    raise ValueError(f"unknown built-in model '{name}' (choose from {', '.join(BUILTINS)})")
