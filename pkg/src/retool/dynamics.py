"""Integration of the lifted flow on G x m* x N.

For fixed eta in g_z the vector field is

    g^-1 g-dot = xi := D_m* hbar(rho, v) + eta
    rho-dot    = m*-part of ad*_xi (rho + J_N(v))
    v-dot      = Omega-sharp(D_N hbar_eta(rho, v))

The (rho, v) part is advanced with classical RK4; the group factor is carried
along with a Runge-Kutta-Munthe-Kaas update g <- g exp(u) so that the whole
scheme is fourth order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lie
from .model import LocalModel, hbar_derivs, momentum_map_Y, velocity

BLOWUP = 1e6


@dataclass
class BundleState:
    g: np.ndarray
    rho: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def copy(self) -> "BundleState":
        return BundleState(np.array(self.g, float), np.array(self.rho, float), np.array(self.v, float), self.t)


@dataclass
class TrajectoryReport:
    times: np.ndarray
    rho: np.ndarray
    v: np.ndarray
    jy_drift: np.ndarray
    implied_residual: np.ndarray
    final: BundleState
    max_jy_drift: float = 0.0
    max_implied_residual: float = 0.0
    max_departure: float = 0.0
    max_group_error: float = 0.0
    aborted: bool = False
    message: str = ""
    samples: list = field(default_factory=list)

    def rows(self):
        """Plot-ready rows (t, rho..., v..., jy_drift, implied residual)."""
        return np.column_stack([self.times, self.rho, self.v, self.jy_drift, self.implied_residual])


class _SliceKernel:
    """Precomputed linear data for repeated evaluation of the slice vector field."""

    def __init__(self, m: LocalModel, eta):
        (eta,) = m.check_dims(eta=eta)
        sp = m.splitting
        self.m, self.eta = m, eta
        n = m.alg.dim
        self.cflat = m.alg.c.reshape(n, n * n)
        self.n = n
        self.Em = sp.m
        self.Dm = sp.dual_basis[sp._block("m")]
        self.Dgz = sp.dual_basis[sp._block("gz")]
        self.xi_eta = sp.gz @ eta if m.dim_gz else np.zeros(n)
        self.Q = np.array(m.Q) if m.dim_gz and m.N_dim else np.zeros((m.dim_gz, m.N_dim, m.N_dim))
        self.Qeta = np.tensordot(eta, self.Q, axes=1) if m.dim_gz else np.zeros((m.N_dim, m.N_dim))
        self.sharp = m.Omega_sharp
        self._last = None
        h = m.hamiltonian
        if h.analytic_grad:
            self.grad = lambda rho, v: h.grad(rho, v)
        else:
            self.grad = lambda rho, v: hbar_derivs(m, rho, v, need_hess=False)[1:3]

    def ad(self, xi):
        return (xi @ self.cflat).reshape(self.n, self.n).T

    def jn(self, v):
        return 0.5 * ((self.Q @ v) @ v)

    def alpha(self, rho, v):
        out = rho @ self.Dm
        if self.m.dim_gz:
            out = out + self.jn(v) @ self.Dgz
        return out

    def __call__(self, rho, v):
        # the monitor and the next RK stage evaluate the same state; keep the last result
        key = (rho.tobytes(), v.tobytes())
        if self._last is not None and self._last[0] == key:
            return self._last[1]
        g_rho, g_v = self.grad(rho, v)
        xi = self.Em @ np.asarray(g_rho, float) + self.xi_eta
        al = self.alpha(rho, v)
        full = self.ad(xi).T @ al
        out = (xi, full @ self.Em, self.sharp @ (np.asarray(g_v, float) - self.Qeta @ v), full, al)
        self._last = (key, out)
        return out

    def implied(self, rho, v):
        if not self.m.dim_gz:
            return 0.0
        _, _, vd, full, _ = self(rho, v)
        lhs = full @ self.m.splitting.gz
        rhs = (self.Q @ vd) @ v
        return float(np.linalg.norm(lhs - rhs))


def slice_field(m: LocalModel, eta, rho, v) -> tuple:
    """(xi, rho-dot, v-dot) at a point of m* x N."""
    rho, v = m.check_dims(rho=rho, v=v)
    xi, rd, vd, _, _ = _SliceKernel(m, eta)(rho, v)
    return xi, rd, vd


def bundle_vector_field(m: LocalModel, eta, s: BundleState) -> tuple:
    """Body velocity in g (apply left translation to get g-dot), rho-dot, v-dot."""
    return slice_field(m, eta, s.rho, s.v)


def implied_residual(m: LocalModel, eta, rho, v) -> float:
    """Size of the g_z*-part of ad*_xi(rho + J_N(v)) minus the rate of change of J_N."""
    rho, v = m.check_dims(rho=rho, v=v)
    return _SliceKernel(m, eta).implied(rho, v)


def _dexpinv(alg, u, xi):
    # inverse derivative of exp for the right-multiplied update g exp(u)
    br = lie.lie_bracket(alg, u, xi)
    return xi + 0.5 * br + lie.lie_bracket(alg, u, br) / 12.0


def _rk4_step(kern: _SliceKernel, group, s: BundleState, dt: float) -> BundleState:
    def f(u, rho, v):
        xi, rd, vd, _, _ = kern(rho, v)
        if u is None:
            return xi, rd, vd
        A = kern.ad(u)
        br = A @ xi
        return xi + 0.5 * br + A @ br / 12.0, rd, vd

    k1 = f(None, s.rho, s.v)
    k2 = f(0.5 * dt * k1[0], s.rho + 0.5 * dt * k1[1], s.v + 0.5 * dt * k1[2])
    k3 = f(0.5 * dt * k2[0], s.rho + 0.5 * dt * k2[1], s.v + 0.5 * dt * k2[2])
    k4 = f(dt * k3[0], s.rho + dt * k3[1], s.v + dt * k3[2])
    comb = [dt / 6.0 * (a + 2 * b + 2 * c + d) for a, b, c, d in zip(k1, k2, k3, k4)]
    g = group.project(lie.group_multiply(group, s.g, group.exp(comb[0])))
    return BundleState(g, s.rho + comb[1], s.v + comb[2], s.t + dt)


def integrate_bundle(m: LocalModel, eta, s0: BundleState, t_end: float, dt: float,
                     sample_every: int = 1) -> TrajectoryReport:
    """Fixed-step integration from ``s0`` to ``t_end`` with conservation monitors."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not np.isfinite(t_end) or t_end < s0.t:
        raise ValueError("t_end must be finite and not before the initial time")
    kern = _SliceKernel(m, eta)
    group = m.group()
    n_steps = int(round((t_end - s0.t) / dt))
    s = s0.copy()
    jy0 = momentum_map_Y(m, s.g, s.rho, s.v)
    x0 = np.concatenate([s.rho, s.v])

    times, rhos, vs, drifts, imps = [], [], [], [], []
    max_dep = max_gerr = 0.0
    aborted, message = False, ""

    def record(state):
        jy = group.coadjoint(state.g, m.mu + kern(state.rho, state.v)[4])
        drift = float(np.linalg.norm(jy - jy0))
        imp = kern.implied(state.rho, state.v)
        return drift, imp

    d, r = record(s)
    times.append(s.t), rhos.append(s.rho.copy()), vs.append(s.v.copy()), drifts.append(d), imps.append(r)
    max_d, max_r = d, r
    for k in range(1, n_steps + 1):
        s = _rk4_step(kern, group, s, dt)
        s.t = s0.t + k * dt
        x = np.concatenate([s.rho, s.v])
        if not np.all(np.isfinite(x)) or np.abs(x).max(initial=0.0) > BLOWUP:
            aborted, message = True, f"state exceeded {BLOWUP:g} at t={s.t:.6g}"
            break
        d, r = record(s)
        max_d, max_r = max(max_d, d), max(max_r, r)
        max_dep = max(max_dep, float(np.linalg.norm(x - x0)))
        if k % sample_every == 0 or k == n_steps:
            max_gerr = max(max_gerr, group.manifold_error(s.g))
            times.append(s.t), rhos.append(s.rho.copy()), vs.append(s.v.copy())
            drifts.append(d), imps.append(r)

    return TrajectoryReport(np.array(times), np.array(rhos).reshape(len(times), -1),
                            np.array(vs).reshape(len(times), -1), np.array(drifts), np.array(imps),
                            s, max_d, max_r, max_dep, max_gerr, aborted, message)


def velocity_at(m: LocalModel, rho, v, eta) -> np.ndarray:
    return velocity(m, rho, v, eta)


__all__ = ["BundleState", "TrajectoryReport", "bundle_vector_field", "integrate_bundle",
           "implied_residual", "slice_field", "hbar_derivs"]
