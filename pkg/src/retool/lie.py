"""Finite-dimensional Lie algebra arithmetic.

Algebras are stored through their structure constants ``c[i, j, k]`` with
``[e_i, e_j] = sum_k c[i, j, k] e_k``.  Dual vectors are coordinate arrays in
the dual basis, so the pairing of ``mu`` with ``xi`` is ``mu @ xi``.

The coadjoint convention used throughout the package is

    <ad*_xi mu, eta> = <mu, [xi, eta]>.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import null_space

NULL_RCOND = 1e-10
BRACKET_TOL = 1e-12
JACOBI_TOL = 1e-12


@dataclass(frozen=True)
class LieAlgebraSpec:
    c: np.ndarray
    inner_product: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 3 or c.shape[0] != c.shape[1] or c.shape[1] != c.shape[2]:
            raise ValueError(f"structure constants must be n x n x n, got {c.shape}")
        n = c.shape[0]
        ip = np.asarray(self.inner_product, dtype=float)
        if ip.shape != (n, n):
            raise ValueError(f"inner_product must be {n} x {n}, got {ip.shape}")
        if not np.allclose(ip, ip.T, atol=1e-12) or np.linalg.eigvalsh(ip).min() <= 0:
            raise ValueError("inner_product must be symmetric positive definite")
        labels = tuple(self.labels) if self.labels else tuple(f"e{i + 1}" for i in range(n))
        if len(labels) != n:
            raise ValueError("labels length does not match dimension")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "inner_product", ip)
        object.__setattr__(self, "labels", labels)
        if self.antisymmetry_residual() > JACOBI_TOL:
            raise ValueError("structure constants are not antisymmetric in the first two indices")
        if self.jacobi_residual() > JACOBI_TOL * max(1.0, float(np.abs(c).max(initial=0.0)) ** 2):
            raise ValueError("structure constants violate the Jacobi identity")

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def antisymmetry_residual(self) -> float:
        return float(np.abs(self.c + self.c.transpose(1, 0, 2)).max(initial=0.0))

    def jacobi_residual(self) -> float:
        # [e_i,[e_j,e_k]] + cyclic, for all basis triples
        c = self.c
        t1 = np.einsum("jkm,iml->ijkl", c, c)
        t2 = np.einsum("kim,jml->ijkl", c, c)
        t3 = np.einsum("ijm,kml->ijkl", c, c)
        return float(np.abs(t1 + t2 + t3).max(initial=0.0))

    def ad(self, xi) -> np.ndarray:
        """Matrix of ad_xi acting on algebra coordinates."""
        xi = self._vec(xi)
        return np.einsum("i,ijk->kj", xi, self.c)

    def is_abelian(self, tol: float = BRACKET_TOL) -> bool:
        return bool(np.abs(self.c).max(initial=0.0) <= tol)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "c": self.c.tolist(),
            "inner_product": self.inner_product.tolist(),
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LieAlgebraSpec":
        for key in ("dim", "c", "inner_product"):
            if key not in d:
                raise ValueError(f"algebra: missing field '{key}'")
        alg = cls(np.asarray(d["c"], dtype=float), np.asarray(d["inner_product"], dtype=float),
                  tuple(d.get("labels", ())))
        if alg.dim != int(d["dim"]):
            raise ValueError("algebra: field 'dim' disagrees with 'c'")
        return alg

    def _vec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        return x

    def __eq__(self, other):
        if not isinstance(other, LieAlgebraSpec):
            return NotImplemented
        return (np.array_equal(self.c, other.c) and np.array_equal(self.inner_product, other.inner_product)
                and self.labels == other.labels)

    __hash__ = None


def so3() -> LieAlgebraSpec:
    """so(3) identified with (R^3, cross product)."""
    c = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        c[i, j, k] = 1.0
        c[j, i, k] = -1.0
    return LieAlgebraSpec(c, np.eye(3), ("e1", "e2", "e3"))


def abelian(n: int) -> LieAlgebraSpec:
    return LieAlgebraSpec(np.zeros((n, n, n)), np.eye(n), tuple(f"e{i + 1}" for i in range(n)))


def t2() -> LieAlgebraSpec:
    return abelian(2)


def builtin_algebra(name: str) -> LieAlgebraSpec:
    if name == "so3":
        return so3()
    if name == "t2":
        return t2()
    if name.startswith("abelian:"):
        return abelian(int(name.split(":", 1)[1]))
    raise ValueError(f"unknown algebra '{name}'")


def lie_bracket(alg: LieAlgebraSpec, xi, eta) -> np.ndarray:
    xi, eta = alg._vec(xi), alg._vec(eta)
    return np.einsum("i,j,ijk->k", xi, eta, alg.c)


def coad(alg: LieAlgebraSpec, xi, mu) -> np.ndarray:
    """ad*_xi mu, with <ad*_xi mu, eta> = <mu, [xi, eta]>."""
    xi, mu = alg._vec(xi), alg._vec(mu)
    return np.einsum("i,ijk,k->j", xi, alg.c, mu)


def _as_basis(basis, n: int) -> np.ndarray:
    """Normalise a basis argument to an n x k matrix whose columns are the vectors."""
    b = np.asarray(basis, dtype=float)
    if b.size == 0:
        return np.zeros((n, 0))
    if b.ndim == 1:
        b = b[:, None]
    if b.shape[0] != n:
        raise ValueError(f"basis vectors must have length {n}, got matrix of shape {b.shape}")
    return b


def orthogonal_complement(inner_product: np.ndarray, sub, ambient=None) -> np.ndarray:
    """Complement of span(sub) inside span(ambient), orthogonal for ``inner_product``."""
    n = inner_product.shape[0]
    sub = _as_basis(sub, n)
    ambient = np.eye(n) if ambient is None else _as_basis(ambient, n)
    if sub.shape[1] == 0:
        return ambient.copy()
    # vectors a @ x with <sub_i, a x> = 0
    constraint = sub.T @ inner_product @ ambient
    coeffs = null_space(constraint, rcond=NULL_RCOND)
    return ambient @ coeffs


@dataclass(frozen=True)
class SplittingData:
    """Bases for g = g_z (+) m (+) q, stored as columns in algebra coordinates."""

    gz: np.ndarray
    m: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        n = max(np.asarray(b).shape[0] if np.asarray(b).size else 0 for b in (self.gz, self.m, self.q))
        object.__setattr__(self, "gz", _as_basis(self.gz, n))
        object.__setattr__(self, "m", _as_basis(self.m, n))
        object.__setattr__(self, "q", _as_basis(self.q, n))
        full = self.full_basis
        if full.shape != (n, n) or abs(np.linalg.det(full)) < 1e-12:
            raise ValueError("splitting bases must together form a basis of the algebra")

    @property
    def dim(self) -> int:
        return self.gz.shape[0]

    @property
    def full_basis(self) -> np.ndarray:
        return np.hstack([self.gz, self.m, self.q])

    @property
    def dual_basis(self) -> np.ndarray:
        """Rows are the dual basis functionals, ordered (g_z, m, q)."""
        return np.linalg.inv(self.full_basis)

    @property
    def dims(self) -> tuple:
        return self.gz.shape[1], self.m.shape[1], self.q.shape[1]

    @property
    def gmu(self) -> np.ndarray:
        return np.hstack([self.gz, self.m])

    def _block(self, which: str) -> slice:
        kz, km, kq = self.dims
        return {"gz": slice(0, kz), "m": slice(kz, kz + km), "q": slice(kz + km, kz + km + kq)}[which]

    def coords(self, xi, which: str) -> np.ndarray:
        """Coordinates of Proj_which(xi) in the chosen basis of that factor."""
        return (self.dual_basis @ np.asarray(xi, dtype=float))[self._block(which)]

    def proj(self, which: str) -> np.ndarray:
        basis = getattr(self, which)
        return basis @ self.dual_basis[self._block(which)]

    def dual_coords(self, alpha, which: str) -> np.ndarray:
        """Coordinates of the component of a dual vector in which* (the annihilator of the other factors)."""
        return np.asarray(alpha, dtype=float) @ getattr(self, which)

    def dual_proj(self, which: str) -> np.ndarray:
        # acts on dual coordinates as alpha -> alpha @ P, i.e. matrix P^T
        return self.proj(which).T

    def embed_dual(self, coords, which: str) -> np.ndarray:
        """Dual vector in g* whose which*-coordinates are ``coords`` and which annihilates the rest."""
        coords = np.asarray(coords, dtype=float)
        return coords @ self.dual_basis[self._block(which)]

    def embed(self, coords, which: str) -> np.ndarray:
        return getattr(self, which) @ np.asarray(coords, dtype=float)

    def invariance_residual(self, alg: LieAlgebraSpec) -> float:
        """Max size of the component of [g_z, factor] leaving each factor."""
        worst = 0.0
        for k in range(self.gz.shape[1]):
            ad = alg.ad(self.gz[:, k])
            for which in ("gz", "m", "q"):
                basis = getattr(self, which)
                if basis.shape[1] == 0:
                    continue
                image = ad @ basis
                leak = image - self.proj(which) @ image
                worst = max(worst, float(np.abs(leak).max()))
        return worst

    def to_dict(self) -> dict:
        return {"gz": self.gz.T.tolist(), "m": self.m.T.tolist(), "q": self.q.T.tolist()}

    @classmethod
    def from_dict(cls, d: dict, n: int) -> "SplittingData":
        def rows(key):
            v = d.get(key, [])
            return np.asarray(v, dtype=float).reshape(-1, n).T if len(v) else np.zeros((n, 0))
        return cls(rows("gz"), rows("m"), rows("q"))


def make_splitting(alg: LieAlgebraSpec, gz, gmu=None) -> SplittingData:
    """Orthogonal splitting g = g_z (+) m (+) q from bases of g_z and g_mu."""
    n = alg.dim
    gz = _as_basis(gz, n)
    gmu = np.eye(n) if gmu is None else _as_basis(gmu, n)
    m = orthogonal_complement(alg.inner_product, gz, gmu)
    q = orthogonal_complement(alg.inner_product, gmu)
    return SplittingData(gz, m, q)


@dataclass(frozen=True)
class GroupRepOnSpace:
    dim: int
    infinitesimal: tuple = field(default_factory=tuple)
    finite: tuple = field(default_factory=tuple)

    def __post_init__(self):
        inf = tuple(np.asarray(a, dtype=float).reshape(self.dim, self.dim) for a in self.infinitesimal)
        fin = tuple(np.asarray(r, dtype=float).reshape(self.dim, self.dim) for r in self.finite)
        for r in fin:
            if np.abs(r.T @ r - np.eye(self.dim)).max(initial=0.0) > 1e-12:
                raise ValueError("finite generators must be orthogonal")
        object.__setattr__(self, "infinitesimal", inf)
        object.__setattr__(self, "finite", fin)


def fixed_subspace(rep: GroupRepOnSpace) -> np.ndarray:
    """Orthonormal basis (columns) of the common fixed space of all generators."""
    n = rep.dim
    blocks = list(rep.infinitesimal) + [r - np.eye(n) for r in rep.finite]
    if n == 0:
        return np.zeros((0, 0))
    if not blocks:
        return np.eye(n)
    stacked = np.vstack(blocks)
    if np.abs(stacked).max() == 0.0:
        return np.eye(n)
    return null_space(stacked, rcond=NULL_RCOND)


@dataclass
class CocentralResult:
    cocentral: bool
    witness: tuple | None = None  # (complement vector, ambient vector, bracket)

    def __bool__(self):
        return self.cocentral


def _contained(inner_product, sub, ambient, tol=1e-10) -> bool:
    if sub.shape[1] == 0:
        return True
    coeffs, *_ = np.linalg.lstsq(ambient, sub, rcond=None)
    return bool(np.abs(ambient @ coeffs - sub).max() <= tol * max(1.0, np.abs(sub).max()))


def check_cocentral(alg: LieAlgebraSpec, sub, ambient) -> CocentralResult:
    """Is ``sub`` co-central in ``ambient``: does a complement m of it satisfy [m, ambient] = 0?"""
    n = alg.dim
    sub, ambient = _as_basis(sub, n), _as_basis(ambient, n)
    if not _contained(alg.inner_product, sub, ambient):
        raise ValueError("subalgebra is not contained in the ambient algebra")
    comp = orthogonal_complement(alg.inner_product, sub, ambient)
    for i in range(comp.shape[1]):
        for j in range(ambient.shape[1]):
            br = lie_bracket(alg, comp[:, i], ambient[:, j])
            if np.abs(br).max(initial=0.0) > BRACKET_TOL:
                return CocentralResult(False, (comp[:, i], ambient[:, j], br))
    return CocentralResult(True)


def normalizer_algebra(alg: LieAlgebraSpec, ad_rep: GroupRepOnSpace, h) -> np.ndarray:
    """Basis of h (+) m^H, the Lie algebra of the normaliser of H."""
    n = alg.dim
    if ad_rep.dim != n:
        raise ValueError("representation dimension does not match the algebra")
    h = _as_basis(h, n)
    m = orthogonal_complement(alg.inner_product, h)
    if m.shape[1] == 0:
        return h
    blocks = [a @ m for a in ad_rep.infinitesimal] + [(r - np.eye(n)) @ m for r in ad_rep.finite]
    if blocks and np.abs(np.vstack(blocks)).max() > 0:
        coeffs = null_space(np.vstack(blocks), rcond=NULL_RCOND)
    else:
        coeffs = np.eye(m.shape[1])
    return np.hstack([h, m @ coeffs])


def bracket_closes_in(alg: LieAlgebraSpec, basis, target, tol: float = 1e-10) -> bool:
    """True when [basis, basis] lies in span(target)."""
    n = alg.dim
    basis, target = _as_basis(basis, n), _as_basis(target, n)
    for i in range(basis.shape[1]):
        for j in range(i + 1, basis.shape[1]):
            br = lie_bracket(alg, basis[:, i], basis[:, j])[:, None]
            if np.abs(br).max() > tol and not _contained(alg.inner_product, br, target, tol):
                return False
    return True


# --- matrix group realisations used for J_Y and the group factor of the bundle flow

def hat(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def so3_exp(w) -> np.ndarray:
    """Rodrigues formula."""
    w = np.asarray(w, dtype=float)
    theta = float(np.linalg.norm(w))
    K = hat(w)
    if theta < 1e-8:
        a = 1.0 - theta**2 / 6.0
        b = 0.5 - theta**2 / 24.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * K + b * (K @ K)


def reorthonormalize(g: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(g)
    return u @ vt


class GroupRealization:
    """Matrix group with exp and the coadjoint action mu -> Ad*_{g^-1} mu."""

    kind = "abstract"

    def identity(self) -> np.ndarray:
        raise NotImplementedError

    def exp(self, xi) -> np.ndarray:
        raise NotImplementedError

    def coadjoint(self, g, mu) -> np.ndarray:
        raise NotImplementedError

    def project(self, g) -> np.ndarray:
        return g

    def manifold_error(self, g) -> float:
        return 0.0


class SO3Group(GroupRealization):
    kind = "so3"

    def identity(self):
        return np.eye(3)

    def exp(self, xi):
        return so3_exp(xi)

    def coadjoint(self, g, mu):
        # with the Euclidean identification Ad*_{g^-1} mu = g mu
        return np.asarray(g) @ np.asarray(mu, dtype=float)

    def project(self, g):
        g = np.asarray(g, float)
        e = g.T @ g - np.eye(3)
        if np.abs(e).max() < 1e-6:
            # one Newton-Schulz step of the polar decomposition
            return g - 0.5 * g @ e
        return reorthonormalize(g)

    def manifold_error(self, g):
        g = np.asarray(g)
        return float(max(np.abs(g.T @ g - np.eye(3)).max(), abs(np.linalg.det(g) - 1.0)))


class TorusGroup(GroupRealization):
    """Torus stored as a vector of angles; coadjoint action is trivial."""

    kind = "torus"

    def __init__(self, n: int):
        self.n = n

    def identity(self):
        return np.zeros(self.n)

    def exp(self, xi):
        return np.asarray(xi, dtype=float).copy()

    def compose(self, g, h):
        return np.asarray(g) + np.asarray(h)

    def coadjoint(self, g, mu):
        return np.asarray(mu, dtype=float).copy()


def group_for(alg: LieAlgebraSpec, kind: str | None = None) -> GroupRealization:
    if kind is None:
        kind = "torus" if alg.is_abelian() else "so3"
    if kind == "so3":
        if alg.dim != 3 or np.abs(alg.c - so3().c).max() > 0:
            raise ValueError("so3 realisation requires the so3 algebra")
        return SO3Group()
    if kind == "torus":
        if not alg.is_abelian():
            raise ValueError("torus realisation requires an Abelian algebra")
        return TorusGroup(alg.dim)
    raise ValueError(f"unsupported group realisation '{kind}'")


def group_multiply(group: GroupRealization, g, h) -> np.ndarray:
    if isinstance(group, TorusGroup):
        return group.compose(g, h)
    return np.asarray(g) @ np.asarray(h)


def random_triples(alg: LieAlgebraSpec, count: int, rng: np.random.Generator) -> Sequence:
    return [tuple(rng.standard_normal(alg.dim) for _ in range(3)) for _ in range(count)]
