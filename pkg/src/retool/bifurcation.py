"""Degenerate slice Hessians: kernels, crossings and Lyapunov-Schmidt reduction.

Along a one-parameter line (rho(t), eta(t)) of parameters the relative
equilibrium equation D_N hbar_eta(rho, v) = 0 is split as N^L = kernel + S.  The
S-component is solved by Newton for each sampled kernel vector y, leaving a
scalar equation in the parameter which is solved by bisection.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import LocalModel, fixed_spaces, fixes_point, hbar_eta_derivs, stabilizer_dim, subgroup, N_generator
from .resolve import REPoint, make_point

KERNEL_REL = 1e-7
PARAM_TOL = 1e-10


class NoCrossingError(RuntimeError):
    pass


def _pencil_scale(m: LocalModel, H: np.ndarray, H0: np.ndarray | None = None) -> float:
    vals = [np.linalg.norm(H, 2) if H.size else 0.0, 1.0]
    if H0 is not None and H0.size:
        vals.append(np.linalg.norm(H0, 2))
    vals += [np.linalg.norm(q, 2) for q in m.Q]
    return float(max(vals))


@dataclass
class KernelData:
    basis: np.ndarray        # orthonormal kernel vectors (columns, ambient N coordinates)
    complement: np.ndarray   # orthonormal basis of S inside N^L
    fixed: np.ndarray        # orthonormal basis of N^L
    cohomogeneity_one: bool
    eigenvalues: np.ndarray
    eta: np.ndarray
    rho: np.ndarray
    sigma: Callable | None = None
    reason: str = ""

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def degenerate(self) -> bool:
        return self.dim > 0

    def to_dict(self) -> dict:
        return {"kernel": self.basis.tolist(), "complement": self.complement.tolist(),
                "dim": self.dim, "cohomogeneity_one": self.cohomogeneity_one,
                "eigenvalues": self.eigenvalues.tolist(), "eta": self.eta.tolist(),
                "rho": self.rho.tolist(), "reason": self.reason}


def kernel_analysis(m: LocalModel, eta, rho=None, L=None, v=None) -> KernelData:
    """Kernel of D^2_N hbar_eta restricted to N^L and the cohomogeneity-one test."""
    rho = np.zeros(m.dim_mstar) if rho is None else rho
    v = np.zeros(m.N_dim) if v is None else v
    rho, v, eta = m.check_dims(rho=rho, v=v, eta=eta)
    _, BN, _ = fixed_spaces(m, L)
    _, _, _, H = hbar_eta_derivs(m, eta, rho, v)
    _, _, _, H0 = hbar_eta_derivs(m, np.zeros(m.dim_gz), rho, v)
    Hr = BN.T @ H @ BN
    w, U = np.linalg.eigh(Hr) if Hr.size else (np.zeros(0), np.zeros((0, 0)))
    small = np.abs(w) < KERNEL_REL * _pencil_scale(m, H, H0)
    ker = BN @ U[:, small]
    comp = BN @ U[:, ~small]
    coh, reason = False, ""
    if ker.shape[1] == 0:
        reason = "empty kernel: non-degenerate"
    elif ker.shape[1] == 1:
        coh, reason = True, "one-dimensional kernel"
    elif ker.shape[1] == 2:
        # need a generator of the isotropy that preserves the kernel and rotates it
        for i in range(m.dim_gz):
            e = np.zeros(m.dim_gz)
            e[i] = 1.0
            A = N_generator(m, e)
            image = A @ ker
            leak = image - ker @ (ker.T @ image)
            if np.abs(leak).max() > 1e-9 * max(1.0, np.abs(A).max()):
                continue
            R = ker.T @ A @ ker
            if abs(np.trace(R)) < 1e-9 * max(1.0, np.abs(R).max()) and np.linalg.det(R) > 1e-12:
                coh, reason = True, "two-dimensional kernel with a circle action"
                break
        if not coh:
            reason = "two-dimensional kernel without a rotating generator"
    else:
        reason = f"kernel of dimension {ker.shape[1]} is not of cohomogeneity one"
    return KernelData(ker, comp, BN, coh, w, eta, rho, None, reason)


@dataclass
class Crossing:
    location: float
    bracket: tuple
    values: tuple


def detect_crossing(sigma: Callable, a: float, b: float, n_samples: int = 201,
                    tol: float = PARAM_TOL) -> list:
    """All sign changes of ``sigma`` on a sample grid of [a, b], refined by bisection.

    A zero where the sign does not change (a tangency) is not a crossing.
    """
    ts = np.linspace(a, b, n_samples)
    vals = np.array([float(sigma(t)) for t in ts])
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite sample of the eigenvalue function")
    out = []
    signs = np.sign(vals)
    nz = np.nonzero(signs)[0]
    for i0, i1 in zip(nz[:-1], nz[1:]):
        if signs[i0] == signs[i1]:
            continue
        lo, hi, flo = ts[i0], ts[i1], vals[i0]
        if i1 - i0 > 1:
            # exact zeros on the grid between opposite signs
            lo, hi = ts[i0], ts[i1]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            fm = float(sigma(mid))
            if fm == 0.0:
                lo = hi = mid
                break
            if np.sign(fm) == np.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
        out.append(Crossing(0.5 * (lo + hi), (float(ts[i0]), float(ts[i1])),
                            (float(vals[i0]), float(vals[i1]))))
    return out


@dataclass
class ParameterLine:
    """rho(t) = rho0 + t drho, eta(t) = eta0 + t deta for t in [lo, hi]."""

    rho0: np.ndarray
    drho: np.ndarray
    eta0: np.ndarray
    deta: np.ndarray
    lo: float
    hi: float

    def at(self, t):
        return self.rho0 + t * self.drho, self.eta0 + t * self.deta

    def to_dict(self):
        return {k: (np.asarray(getattr(self, k)).tolist()) for k in ("rho0", "drho", "eta0", "deta", "lo", "hi")}


@dataclass
class BifurcatingPoint:
    y: np.ndarray
    y_norm: float
    t: float
    point: REPoint
    isotropy_dim: int
    L_fixes: bool

    def to_dict(self):
        return {"y": self.y.tolist(), "y_norm": self.y_norm, "t": self.t, "point": self.point.to_dict(),
                "isotropy_dim": self.isotropy_dim, "L_fixes": self.L_fixes}


@dataclass
class BifurcationReport:
    crossing: float | None
    kernel: KernelData
    line: ParameterLine
    points: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    min_inner_eig: float = float("inf")

    def to_dict(self):
        return {"crossing": self.crossing, "kernel": self.kernel.to_dict(), "line": self.line.to_dict(),
                "points": [p.to_dict() for p in self.points], "skipped": self.skipped,
                "min_inner_eig": self.min_inner_eig}

    def rows(self):
        return [(p.y_norm, p.t, max(p.point.r1, p.point.r2)) for p in self.points]


def _inner_solve(m: LocalModel, rho, eta, y, S, s0, scale, tol=1e-13, max_iter=50):
    """Newton for s in S with Proj_S D_N hbar_eta(rho, y + s) = 0.  Returns (s, min |eig|)."""
    c = S.T @ s0 if S.size else np.zeros(0)
    min_eig = float("inf")
    for _ in range(max_iter):
        v = y + S @ c
        _, _, g_v, H = hbar_eta_derivs(m, eta, rho, v)
        r = S.T @ g_v
        J = S.T @ H @ S
        if J.size:
            min_eig = min(min_eig, float(np.abs(np.linalg.eigvalsh(J)).min()))
            if min_eig < 1e-6 * scale:
                raise RuntimeError("inner Hessian became degenerate")
        if np.linalg.norm(r) < tol * max(1.0, scale):
            return S @ c, min_eig
        c = c - np.linalg.solve(J, r)
    v = y + S @ c
    if np.linalg.norm(S.T @ hbar_eta_derivs(m, eta, rho, v, need_hess=False)[2]) < 1e-10:
        return S @ c, min_eig
    raise RuntimeError("inner Newton did not converge")


def lyapunov_schmidt(m: LocalModel, kernel: KernelData, line: ParameterLine, y_samples,
                     L=None, n_grid: int = 41, residual_tol: float = 1e-8) -> BifurcationReport:
    """Bifurcating relative equilibria for each sampled kernel vector y."""
    if not kernel.cohomogeneity_one:
        from .resolve import HypothesisError
        raise HypothesisError("cohomogeneity-one", kernel.reason or "kernel is not of cohomogeneity one")
    K = subgroup(m, L)
    S = kernel.complement
    _, _, _, H0 = hbar_eta_derivs(m, np.zeros(m.dim_gz), kernel.rho, np.zeros(m.N_dim))
    scale = _pencil_scale(m, H0)
    report = BifurcationReport(None, kernel, line)
    for y in y_samples:
        y = np.asarray(y, float)
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            raise ValueError("kernel samples must be non-zero")
        if np.linalg.norm(y - kernel.basis @ (kernel.basis.T @ y)) > 1e-10 * ny:
            raise ValueError("sample does not lie in the kernel")
        cache = {"s": np.zeros(m.N_dim)}

        def g_red(t):
            rho, eta = line.at(t)
            s, me = _inner_solve(m, rho, eta, y, S, cache["s"], scale)
            cache["s"] = s
            report.min_inner_eig = min(report.min_inner_eig, me)
            g_v = hbar_eta_derivs(m, eta, rho, y + s, need_hess=False)[2]
            return float(g_v @ y) / ny

        try:
            crossings = detect_crossing(g_red, line.lo, line.hi, n_grid)
        except RuntimeError as exc:
            report.skipped.append({"y_norm": ny, "reason": str(exc)})
            continue
        if not crossings:
            report.skipped.append({"y_norm": ny, "reason": "no sign change of the reduced function"})
            continue
        for cr in crossings:
            t = cr.location
            rho, eta = line.at(t)
            try:
                s, _ = _inner_solve(m, rho, eta, y, S, cache["s"], scale)
            except RuntimeError as exc:
                report.skipped.append({"y_norm": ny, "reason": str(exc)})
                continue
            pt = make_point(m, rho, eta, y + s)
            if pt.r1 > residual_tol or pt.r2 > residual_tol:
                report.skipped.append({"y_norm": ny, "reason": f"residuals {pt.r1:.2e}, {pt.r2:.2e}"})
                continue
            pt.converged = True
            report.points.append(BifurcatingPoint(y, ny, t, pt, stabilizer_dim(m, rho, pt.v),
                                                  fixes_point(m, K, rho, pt.v)))
    if report.points:
        report.crossing = float(np.median([p.t for p in report.points]))
    return report


# ---------------------------------------------------------------------- generic crossings

@dataclass
class CrossingCertificate:
    t_star: float
    matrix: np.ndarray
    eigenvalues: np.ndarray
    all_roots: list
    basis: np.ndarray

    def to_dict(self):
        return {"t_star": self.t_star, "matrix": self.matrix.tolist(),
                "eigenvalues": self.eigenvalues.tolist(), "all_roots": self.all_roots}


def _quadratic_roots(a, b, c):
    """Real roots of a t^2 + b t + c with the cancellation-free formula."""
    if abs(a) < 1e-300:
        return [] if b == 0 else [-c / b]
    disc = b * b - 4 * a * c
    if disc < 0:
        if disc > -1e-14 * max(b * b, abs(4 * a * c), 1e-300):
            disc = 0.0
        else:
            return []
    sq = np.sqrt(disc)
    q = -0.5 * (b + np.copysign(sq, b if b != 0 else 1.0))
    roots = [q / a]
    roots.append(c / q if q != 0 else roots[0])
    return sorted(roots)


def generic_crossing_search(m: LocalModel, base: REPoint, eta_dir, L=None, basis=None) -> CrossingCertificate:
    """Smallest |t| with det H(eta + t eta_dir) = 0 on a two-dimensional subspace.

    ``basis`` defaults to N^L; it must be two-dimensional.
    """
    from .resolve import HypothesisError
    eta_dir = np.atleast_1d(np.asarray(eta_dir, float))
    if basis is None:
        _, basis, _ = fixed_spaces(m, L)
    B = np.asarray(basis, float)
    if B.shape[1] != 2:
        raise ValueError(f"restricted space must be two-dimensional, got {B.shape[1]}")
    _, _, _, H = hbar_eta_derivs(m, base.eta, base.rho, base.v)
    H0 = B.T @ H @ B
    w0 = np.linalg.eigvalsh(H0)
    if not (w0.min() > 0 or w0.max() < 0):
        raise HypothesisError("formal-stability", "restricted pencil is not definite at the base point")
    D = -B.T @ sum((e * q for e, q in zip(eta_dir, m.Q)), np.zeros_like(H)) @ B
    # D proportional to H0 means the determinant only vanishes where the whole matrix does
    ratio = np.sum(D * H0) / np.sum(H0 * H0)
    if np.abs(D - ratio * H0).max() <= 1e-12 * max(1.0, np.abs(D).max()):
        raise HypothesisError("crossing", "pencil direction is proportional to the Hessian (non-generic)")
    c = np.linalg.det(H0)
    a = np.linalg.det(D)
    b = H0[0, 0] * D[1, 1] + H0[1, 1] * D[0, 0] - 2 * H0[0, 1] * D[0, 1]
    roots = _quadratic_roots(a, b, c)
    if not roots:
        raise NoCrossingError("no real root of the restricted determinant")
    polished = []
    for t in roots:
        for _ in range(5):
            f = c + t * (b + t * a)
            df = b + 2 * a * t
            if df == 0:
                break
            t -= f / df
        polished.append(float(t))
    t_star = min(polished, key=abs)
    M = H0 + t_star * D
    w = np.linalg.eigvalsh(M)
    scale = max(1.0, np.abs(H0).max(), np.abs(D).max())
    if np.abs(M).max() < 1e-10 * scale or not (abs(w[0]) < 1e-9 * scale or abs(w[1]) < 1e-9 * scale) \
            or min(abs(w[0]), abs(w[1])) == max(abs(w[0]), abs(w[1])):
        raise NoCrossingError("matrix at the root is not rank one")
    return CrossingCertificate(t_star, M, w, polished, B)
