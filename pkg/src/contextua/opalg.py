"""Finite-dimensional complex operator algebra.

Dense matrices over C, projections and their lattice operations, spectral
decomposition, Jordan product, and a registry that gives projections stable
canonical identities across contexts.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-9
EIG_CLUSTER_GAP = 1e-7
CANONICAL_DECIMALS = 6
CANONICAL_GRID = 10.0 ** (-CANONICAL_DECIMALS)


class CanonicalizationError(ValueError):
    """Raised when two distinct projections are too close for the rounding grid."""


def as_operator(m) -> np.ndarray:
    """Validate and return a square complex matrix with finite entries."""
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"operator must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise ValueError("operator entries must be finite")
    return arr


def max_norm(m) -> float:
    """Max-entry absolute norm, the equality yardstick used throughout."""
    arr = np.asarray(m)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def is_self_adjoint(m, tol: float = DEFAULT_TOL) -> bool:
    arr = as_operator(m)
    return max_norm(arr - arr.conj().T) <= tol


def is_projection(m, tol: float = DEFAULT_TOL) -> bool:
    """True iff ``m`` is self-adjoint and idempotent within ``tol``."""
    arr = as_operator(m)
    if max_norm(arr - arr.conj().T) > tol:
        return False
    return max_norm(arr @ arr - arr) <= tol


def commutes(a, b, tol: float = DEFAULT_TOL) -> bool:
    a = as_operator(a)
    b = as_operator(b)
    if a.shape != b.shape:
        raise ValueError("operators must have equal dimension")
    return max_norm(a @ b - b @ a) <= tol


def jordan_product(a, b) -> np.ndarray:
    """Symmetrized product (ab + ba) / 2; self-adjoint for self-adjoint inputs."""
    a = as_operator(a)
    b = as_operator(b)
    if a.shape != b.shape:
        raise ValueError("operators must have equal dimension")
    return 0.5 * (a @ b + b @ a)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Projection:
    """A validated projection matrix together with its rank."""

    matrix: np.ndarray
    rank: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def complement(self) -> "Projection":
        return Projection(_readonly(np.eye(self.dim) - self.matrix), self.dim - self.rank)


def projection(m, tol: float = DEFAULT_TOL) -> Projection:
    """Build a :class:`Projection`, enforcing self-adjointness and idempotence.

    The rank is the rounded trace; a trace that is not close to an integer
    means the input is not a projection and is rejected.
    """
    arr = as_operator(m)
    if not is_projection(arr, tol):
        raise ValueError("matrix is not a projection within tolerance")
    tr = float(np.real(np.trace(arr)))
    rank = int(round(tr))
    if abs(tr - rank) > max(tol * arr.shape[0], 1e-7):
        raise ValueError(f"projection trace {tr} is not near an integer")
    return Projection(_readonly(arr), rank)


def identity_projection(dim: int) -> Projection:
    return Projection(_readonly(np.eye(dim, dtype=complex)), dim)


def zero_projection(dim: int) -> Projection:
    return Projection(_readonly(np.zeros((dim, dim), dtype=complex)), 0)


@dataclass(frozen=True)
class Ray:
    """A unit vector considered up to global phase."""

    vector: np.ndarray

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


def ray(v, tol: float = DEFAULT_TOL) -> Ray:
    arr = np.array(v, dtype=complex).reshape(-1)
    norm = float(np.linalg.norm(arr))
    if norm <= tol:
        raise ValueError("degenerate ray")
    return Ray(_readonly(arr / norm))


def rays_equivalent(r1: Ray, r2: Ray, tol: float = DEFAULT_TOL) -> bool:
    """Two rays are the same iff |<u, v>| = 1, i.e. they differ by a phase."""
    if r1.dim != r2.dim:
        return False
    return abs(abs(np.vdot(r1.vector, r2.vector)) - 1.0) <= tol


def projection_from_ray(r) -> Projection:
    """Rank-1 projection |v><v| onto the ray; phase drops out."""
    if not isinstance(r, Ray):
        r = ray(r)
    v = r.vector
    return Projection(_readonly(np.outer(v, v.conj())), 1)


@dataclass(frozen=True)
class DensityMatrix:
    """Self-adjoint, trace-1, positive-semidefinite matrix."""

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def density_matrix(m, tol: float = DEFAULT_TOL, psd_tol: float | None = None) -> DensityMatrix:
    arr = as_operator(m)
    if max_norm(arr - arr.conj().T) > tol:
        raise ValueError("density matrix must be self-adjoint")
    tr = complex(np.trace(arr))
    if abs(tr - 1.0) > max(tol * arr.shape[0], tol):
        raise ValueError(f"density matrix must have trace 1, got {tr}")
    floor = float(np.min(np.linalg.eigvalsh(0.5 * (arr + arr.conj().T))))
    if floor < -(psd_tol if psd_tol is not None else tol):
        raise ValueError(f"density matrix has negative eigenvalue {floor}")
    return DensityMatrix(_readonly(arr))


def meet(p: Projection, q: Projection, tol: float = DEFAULT_TOL) -> Projection:
    """Projection onto the intersection of the two images.

    Computed as the null space of (1-p) + (1-q): a vector is killed by that
    positive operator exactly when it lies in both images. Singular values
    below ``tol`` count as zero, which also fixes the rank.
    """
    if p.dim != q.dim:
        raise ValueError("projections must have equal dimension")
    d = p.dim
    a = (np.eye(d) - p.matrix) + (np.eye(d) - q.matrix)
    _, s, vh = np.linalg.svd(a)
    null_mask = s <= max(tol, s[0] * tol if s.size else tol)
    basis = vh[null_mask].conj().T  # columns span the intersection
    rank = basis.shape[1]
    if rank == 0:
        return zero_projection(d)
    return Projection(_readonly(basis @ basis.conj().T), rank)


def join(p: Projection, q: Projection, tol: float = DEFAULT_TOL) -> Projection:
    """Projection onto the span of the two images, via 1 - ((1-p) ^ (1-q))."""
    return meet(p.complement(), q.complement(), tol).complement()


def leq_projection(p: Projection, q: Projection, tol: float = DEFAULT_TOL) -> bool:
    """p <= q as projections, i.e. qp = p."""
    return max_norm(q.matrix @ p.matrix - p.matrix) <= tol


def cluster_eigenvalues(evals: np.ndarray, gap: float = EIG_CLUSTER_GAP) -> list[np.ndarray]:
    """Group sorted eigenvalues into clusters separated by at least ``gap``.

    Merging numerically split degenerate eigenvalues is required before
    forming spectral atoms, otherwise a single eigenspace shows up as
    several nearly-parallel projections.
    """
    order = np.argsort(evals)
    groups: list[list[int]] = []
    for idx in order:
        if groups and evals[idx] - evals[groups[-1][-1]] < gap:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    return [np.array(g) for g in groups]


def spectral_atoms(a, tol: float = DEFAULT_TOL) -> list[tuple[float, Projection]]:
    """Spectral decomposition of a self-adjoint matrix into eigenvalue atoms.

    Returns pairs (eigenvalue, projection) with mutually orthogonal
    projections summing to the identity; eigenvalues are distinct after
    clustering. The reconstruction sum(A_i p_i) is checked against the
    input within 10 * tol.
    """
    arr = as_operator(a)
    if max_norm(arr - arr.conj().T) > tol:
        raise ValueError("spectral_atoms requires a self-adjoint matrix")
    herm = 0.5 * (arr + arr.conj().T)
    evals, vecs = np.linalg.eigh(herm)
    atoms: list[tuple[float, Projection]] = []
    for group in cluster_eigenvalues(evals):
        block = vecs[:, group]
        value = float(np.mean(evals[group]))
        atoms.append((value, Projection(_readonly(block @ block.conj().T), len(group))))
    recon = sum(val * p.matrix for val, p in atoms)
    if max_norm(recon - herm) > 10 * max(tol, 1e-12):
        raise RuntimeError("spectral reconstruction failed beyond tolerance")
    return atoms


def canonical_key(matrix) -> str:
    """Canonical identity of a projection: entries rounded to the grid.

    Projection matrices carry no global phase (|v><v| is phase-free), so
    rounding the real and imaginary parts to ``CANONICAL_DECIMALS`` decimals
    is already canonical; -0.0 is normalized to 0.0 before hashing.
    """
    arr = np.asarray(matrix, dtype=complex)
    re = np.round(arr.real, CANONICAL_DECIMALS) + 0.0
    im = np.round(arr.imag, CANONICAL_DECIMALS) + 0.0
    payload = np.ascontiguousarray(np.stack([re, im])).tobytes()
    return "p" + hashlib.sha1(payload).hexdigest()[:12]


class ProjectionRegistry:
    """Registry assigning canonical keys to projections of a fixed dimension.

    Cross-context identity of projections is decided here: two projections
    are the same iff they share a canonical key and differ by at most
    ``tol`` entrywise. A pair of distinct projections closer than the
    rounding grid is rejected outright, since their identity would depend
    on rounding luck.
    """

    def __init__(self, dim: int, tol: float = DEFAULT_TOL):
        self.dim = dim
        self.tol = tol
        self._by_key: dict[str, Projection] = {}

    def register(self, p) -> str:
        if not isinstance(p, Projection):
            p = projection(p, self.tol)
        if p.dim != self.dim:
            raise ValueError(f"projection dim {p.dim} does not match registry dim {self.dim}")
        key = canonical_key(p.matrix)
        existing = self._by_key.get(key)
        if existing is not None:
            if max_norm(existing.matrix - p.matrix) <= self.tol:
                return key
            raise CanonicalizationError(
                "distinct projections collide on the canonical rounding grid"
            )
        for other_key, other in self._by_key.items():
            if max_norm(other.matrix - p.matrix) < CANONICAL_GRID:
                raise CanonicalizationError(
                    f"projections {key} and {other_key} are closer than the rounding grid"
                )
        self._by_key[key] = p
        return key

    def get(self, key: str) -> Projection:
        try:
            return self._by_key[key]
        except KeyError:
            raise KeyError(f"unknown projection key {key!r}") from None

    def keys(self):
        return self._by_key.keys()

    def items(self):
        return self._by_key.items()

    def __contains__(self, key: str) -> bool:
        return key in self._by_key

    def __len__(self) -> int:
        return len(self._by_key)
