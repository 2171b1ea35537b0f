"""Affine symmetric pencils H(eta) = H0 - sum_i eta_i Q_i and definiteness search.

The smallest eigenvalue of an affine symmetric family is concave in eta and
the largest is convex, so both optima can be found by one-dimensional
golden-section search (with coordinate ascent when eta has more than one
component).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

SYM_TOL = 1e-12
DEFAULT_BOX = (-1e3, 1e3)
INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


class Verdict(str, Enum):
    POSITIVE = "PositiveDefinite"
    NEGATIVE = "NegativeDefinite"
    INDEFINITE = "Indefinite-for-all-eta"
    INCONCLUSIVE = "Inconclusive"


def _check_symmetric(M: np.ndarray, what: str = "matrix") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{what} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{what} contains non-finite entries")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if np.abs(M - M.T).max(initial=0.0) > SYM_TOL * scale:
        raise ValueError(f"{what} is not symmetric")
    return M


def restrict(M: np.ndarray, basis) -> np.ndarray:
    """Pull back a quadratic form to span(basis): B^T M B."""
    if basis is None:
        return M
    B = np.asarray(basis, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    R = B.T @ M @ B
    return 0.5 * (R + R.T)


def eig_sym(M, subspace=None):
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric form.

    With ``subspace`` (orthonormal columns) the restricted form B^T M B is used
    and eigenvectors are returned in subspace coordinates.
    """
    M = _check_symmetric(M)
    R = restrict(M, subspace)
    if R.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    return np.linalg.eigh(R)


@dataclass(frozen=True)
class HessianPencil:
    H0: np.ndarray
    Q: tuple = field(default_factory=tuple)
    subspace: np.ndarray | None = None

    def __post_init__(self):
        H0 = _check_symmetric(self.H0, "H0")
        Q = tuple(_check_symmetric(q, f"Q[{i}]") for i, q in enumerate(self.Q))
        for q in Q:
            if q.shape != H0.shape:
                raise ValueError("all pencil matrices must share one shape")
        object.__setattr__(self, "H0", H0)
        object.__setattr__(self, "Q", Q)
        if self.subspace is not None:
            B = np.asarray(self.subspace, dtype=float)
            if B.ndim == 1:
                B = B[:, None]
            if B.shape[0] != H0.shape[0]:
                raise ValueError("subspace basis has the wrong ambient dimension")
            object.__setattr__(self, "subspace", B)

    @property
    def n_eta(self) -> int:
        return len(self.Q)

    @property
    def size(self) -> int:
        return self.H0.shape[0] if self.subspace is None else self.subspace.shape[1]

    def at(self, eta) -> np.ndarray:
        """H(eta), restricted to the subspace when one is set."""
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        if eta.shape != (self.n_eta,):
            raise ValueError(f"eta must have length {self.n_eta}")
        H = self.H0.copy()
        for e, q in zip(eta, self.Q):
            H -= e * q
        return restrict(H, self.subspace)

    def projected(self) -> "HessianPencil":
        """Equivalent pencil with the restriction applied explicitly."""
        if self.subspace is None:
            return self
        return HessianPencil(restrict(self.H0, self.subspace),
                             tuple(restrict(q, self.subspace) for q in self.Q))

    def extreme_eigs(self, eta) -> tuple:
        w = np.linalg.eigvalsh(self.at(eta))
        return float(w[0]), float(w[-1])


@dataclass
class StabilityCertificate:
    verdict: Verdict
    eta_star: np.ndarray
    margin: float
    iterations: int
    subspace: np.ndarray | None = None
    tolerance: float = 0.0
    truncated: bool = False  # optimiser sits on the boundary of the search box
    also_definite: str | None = None
    best_lambda_min: float = float("nan")
    best_lambda_max: float = float("nan")

    @property
    def definite(self) -> bool:
        return self.verdict in (Verdict.POSITIVE, Verdict.NEGATIVE)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "eta_star": [float(x) for x in np.atleast_1d(self.eta_star)],
            "margin": float(self.margin),
            "iterations": int(self.iterations),
            "tolerance": float(self.tolerance),
            "truncated": bool(self.truncated),
            "also_definite": self.also_definite,
            "best_lambda_min": float(self.best_lambda_min),
            "best_lambda_max": float(self.best_lambda_max),
            "subspace": None if self.subspace is None else np.asarray(self.subspace).tolist(),
        }


def golden_max(fun, lo: float, hi: float, xtol: float = 1e-12, max_iter: int = 400):
    """Maximise a unimodal function on [lo, hi]; endpoints are also examined."""
    if lo > hi:
        raise ValueError("empty interval")
    if hi - lo <= xtol:
        x = 0.5 * (lo + hi) if hi > lo else lo
        return x, fun(x), 1
    a, b = lo, hi
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    it = 2
    tol = xtol * max(1.0, abs(lo), abs(hi))
    while b - a > tol and it < max_iter:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = fun(d)
        it += 1
    candidates = [(fc, c), (fd, d), (fun(lo), lo), (fun(hi), hi)]
    best_f, best_x = max(candidates, key=lambda t: t[0])
    return best_x, best_f, it + 2


def _maximise(fun, box: np.ndarray, rng: np.random.Generator, restarts: int = 8,
              max_sweeps: int = 200):
    """Maximise a concave function over a box."""
    k = box.shape[0]
    if k == 0:
        return np.zeros(0), fun(np.zeros(0)), 1
    if k == 1:
        x, f, it = golden_max(lambda s: fun(np.array([s])), box[0, 0], box[0, 1])
        return np.array([x]), f, it
    best_x, best_f, total = None, -np.inf, 0
    starts = [0.5 * (box[:, 0] + box[:, 1])]
    starts += [rng.uniform(box[:, 0], box[:, 1]) for _ in range(restarts - 1)]
    for x in starts:
        x = x.copy()
        f = fun(x)
        for _ in range(max_sweeps):
            f_prev = f
            for i in range(k):
                def line(s, i=i):
                    y = x.copy()
                    y[i] = s
                    return fun(y)
                s, f_new, it = golden_max(line, box[i, 0], box[i, 1])
                total += it
                if f_new >= f:
                    x[i], f = s, f_new
            if f - f_prev <= 1e-14 * max(1.0, abs(f)):
                break
        if f > best_f:
            best_x, best_f = x.copy(), f
    return best_x, best_f, total


def _normalise_box(box, k: int) -> np.ndarray:
    if box is None:
        return np.tile(np.array(DEFAULT_BOX, dtype=float), (k, 1))
    b = np.asarray(box, dtype=float)
    if b.ndim == 1:
        b = np.tile(b, (k, 1))
    if b.shape != (k, 2):
        raise ValueError(f"box must give (lo, hi) for each of {k} eta components")
    if not np.all(np.isfinite(b)):
        raise ValueError("box bounds must be finite")
    if np.any(b[:, 0] > b[:, 1]):
        raise ValueError("empty box")
    return b


def certify_definite(p: HessianPencil, box=None, seed: int = 0) -> StabilityCertificate:
    """Search eta in ``box`` for a definite member of the pencil.

    The smallest eigenvalue is maximised and the largest minimised.  If both a
    positive and a negative definite member exist, the one with the larger
    margin is reported (ties go to NegativeDefinite) and the other is noted in
    ``also_definite``.
    """
    if not np.all(np.isfinite(p.H0)) or any(not np.all(np.isfinite(q)) for q in p.Q):
        raise ValueError("pencil contains NaN")
    b = _normalise_box(box, p.n_eta)
    rng = np.random.default_rng(seed)

    scale = np.linalg.norm(restrict(p.H0, p.subspace), 2) if p.size else 0.0
    if scale == 0.0:
        scale = max([np.linalg.norm(restrict(q, p.subspace), 2) for q in p.Q] + [1.0])
    tol = 1e-8 * scale

    x_pos, f_pos, it1 = _maximise(lambda e: p.extreme_eigs(e)[0], b, rng)
    x_neg, g_neg, it2 = _maximise(lambda e: -p.extreme_eigs(e)[1], b, rng)
    f_neg = -g_neg
    iterations = it1 + it2

    pos_ok, neg_ok = f_pos > tol, f_neg < -tol
    also = None
    if pos_ok and neg_ok:
        if f_pos > -f_neg:
            verdict, x, margin, also = Verdict.POSITIVE, x_pos, f_pos, Verdict.NEGATIVE.value
        else:
            verdict, x, margin, also = Verdict.NEGATIVE, x_neg, f_neg, Verdict.POSITIVE.value
    elif pos_ok:
        verdict, x, margin = Verdict.POSITIVE, x_pos, f_pos
    elif neg_ok:
        verdict, x, margin = Verdict.NEGATIVE, x_neg, f_neg
    elif f_pos < -tol and f_neg > tol:
        # report the member closest to being definite
        if -f_pos <= f_neg:
            verdict, x, margin = Verdict.INDEFINITE, x_pos, f_pos
        else:
            verdict, x, margin = Verdict.INDEFINITE, x_neg, f_neg
    else:
        if abs(f_neg) <= tol and (abs(f_pos) > tol or abs(f_neg) < abs(f_pos)):
            verdict, x, margin = Verdict.INCONCLUSIVE, x_neg, f_neg
        else:
            verdict, x, margin = Verdict.INCONCLUSIVE, x_pos, f_pos

    if verdict in (Verdict.POSITIVE, Verdict.NEGATIVE):
        lo, hi = p.extreme_eigs(x)
        recomputed = lo if verdict is Verdict.POSITIVE else hi
        if abs(recomputed - margin) > 1e-10 * max(1.0, abs(margin)):
            raise RuntimeError("certificate margin failed its re-check")
        margin = recomputed

    width = b[:, 1] - b[:, 0]
    on_edge = np.any((width > 0) & ((np.abs(x - b[:, 0]) < 1e-9 * np.maximum(1.0, width))
                                    | (np.abs(x - b[:, 1]) < 1e-9 * np.maximum(1.0, width))))
    return StabilityCertificate(verdict, np.asarray(x, dtype=float), float(margin), iterations,
                                p.subspace, tol, bool(on_edge), also, float(f_pos), float(f_neg))


def certify_at(p: HessianPencil, eta) -> StabilityCertificate:
    """Verdict for one fixed eta (degenerate box)."""
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    return certify_definite(p, np.column_stack([eta, eta]))


def lambda_min_profile(p: HessianPencil, grid, threads: int = 1) -> np.ndarray:
    """Rows (eta_1..eta_k, lambda_min, lambda_max) in grid order."""
    pts = np.asarray(grid, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if threads > 1 and len(pts) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            ext = list(ex.map(p.extreme_eigs, pts))
    else:
        ext = [p.extreme_eigs(e) for e in pts]
    return np.column_stack([pts, np.array(ext).reshape(len(pts), 2)])
