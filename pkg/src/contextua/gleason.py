"""Probabilistic presheaf: per-context measures, reconstruction, dilation.

Each context carries a finitely additive probability measure given by one
weight per atom; restriction is marginalisation. A section over the whole
poset determines a state by linear reconstruction exactly when the
registered projections span the self-adjoint operators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .contexts import ContextPoset, PresheafShape
from .opalg import (
    DEFAULT_TOL,
    DensityMatrix,
    Projection,
    density_matrix,
    max_norm,
)
RESIDUAL_TOL = 1e-6
RANK_TOL = 1e-8
PSD_TOL = 1e-7


@dataclass(frozen=True)
class ContextMeasure:
    """Finitely additive probability measure on one context's atoms."""

    context: int
    weights: np.ndarray


def context_measure(
    poset: ContextPoset, node: int, weights, tol: float = DEFAULT_TOL
) -> ContextMeasure:
    """Validate and clamp a weight vector into a measure.

    Weights in [-tol, 0) are clamped to 0; anything more negative is
    rejected, as is a total differing from 1 beyond tol.
    """
    w = np.array(weights, dtype=float).reshape(-1)
    if len(w) != len(poset.nodes[node].atoms):
        raise ValueError("one weight per atom required")
    if np.any(w < -tol):
        raise ValueError(f"negative weight beyond tolerance: {w.min()}")
    w = np.clip(w, 0.0, None)
    if abs(float(w.sum()) - 1.0) > max(tol * len(w), tol):
        raise ValueError(f"weights must sum to 1, got {w.sum()}")
    w.flags.writeable = False
    return ContextMeasure(node, w)


@dataclass(frozen=True)
class ProbSection:
    """One measure per node over a down-closed domain."""

    assignment: Mapping[int, ContextMeasure]
    domain: frozenset[int]


def marginalise(
    poset: ContextPoset, m: ContextMeasure, target: int
) -> ContextMeasure:
    """Restriction map of the probabilistic presheaf: sum weights downward."""
    if target == m.context:
        return m
    if not poset.order[target, m.context]:
        raise ValueError(f"target {target} is not below context {m.context}")
    dom = poset.dominator_map(target, m.context)
    out = np.zeros(len(poset.nodes[target].atoms))
    np.add.at(out, dom, np.asarray(m.weights))
    out.flags.writeable = False
    return ContextMeasure(target, out)


def probabilistic_shape(poset: ContextPoset) -> PresheafShape:
    sizes = tuple(-1 for _ in poset.nodes)  # measure simplices, not finite sets

    def restrict(m: ContextMeasure, large: int, small: int) -> ContextMeasure:
        assert m.context == large
        return marginalise(poset, m, small)

    return PresheafShape(poset, sizes, restrict)


def verify_prob_section(
    poset: ContextPoset, s: ProbSection, tol: float = DEFAULT_TOL
) -> bool:
    """Marginalisation compatibility plus equal weights on shared projections."""
    check_tol = max(tol * 100, 1e-9)
    for node in s.domain:
        m = s.assignment.get(node)
        if m is None or m.context != node:
            return False
        for i in range(len(poset)):
            if poset.order[i, node] and i not in s.domain:
                return False
    for i in s.domain:
        for j in s.domain:
            if i == j or not poset.order[i, j]:
                continue
            got = marginalise(poset, s.assignment[j], i).weights
            if max_norm(got - s.assignment[i].weights) > check_tol:
                return False
    seen: dict[str, float] = {}
    for node in s.domain:
        for idx, key in enumerate(poset.atom_keys(node)):
            w = float(s.assignment[node].weights[idx])
            if key in seen and abs(seen[key] - w) > check_tol:
                return False
            seen.setdefault(key, w)
    return True


def section_from_state(poset: ContextPoset, rho: DensityMatrix) -> ProbSection:
    """Born weights tr(rho p) per atom, in every context of the poset."""
    if rho.dim != poset.dim:
        raise ValueError(f"state dim {rho.dim} does not match poset dim {poset.dim}")
    assignment = {}
    for i in range(len(poset)):
        w = np.array(
            [float(np.real(np.trace(rho.matrix @ p.matrix))) for p in poset.atoms_of(i)]
        )
        assignment[i] = context_measure(poset, i, w, tol=1e-7)
    return ProbSection(assignment, frozenset(range(len(poset))))


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal (Hilbert-Schmidt) real basis of d x d Hermitian matrices."""
    mats = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for k in range(1, d):
        for j in range(k):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1 / np.sqrt(2)
            mats.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j / np.sqrt(2)
            m[k, j] = 1j / np.sqrt(2)
            mats.append(m)
    for ell in range(1, d):
        m = np.zeros((d, d), dtype=complex)
        m[np.arange(ell), np.arange(ell)] = 1.0
        m[ell, ell] = -float(ell)
        mats.append(m / np.sqrt(ell * (ell + 1)))
    return np.stack(mats)


def _constraint_rows(basis: np.ndarray, mats: list[np.ndarray]) -> np.ndarray:
    """Real rows tr(p G_k) for Hermitian p against a Hermitian basis."""
    stacked = np.stack(mats)
    return np.real(np.einsum("rij,kji->rk", stacked, basis))


@dataclass
class ReconstructionResult:
    status: str  # "unique" | "underdetermined" | "infeasible"
    state: DensityMatrix | None = None
    residual: float = 0.0
    eigenvalues: np.ndarray | None = None
    solution_space_dim: int | None = None
    reason: str = ""

    def to_report(self) -> dict:
        out = {"status": self.status, "residual": self.residual, "reason": self.reason}
        if self.eigenvalues is not None:
            out["eigenvalues"] = [float(x) for x in self.eigenvalues]
        if self.solution_space_dim is not None:
            out["solution_space_dim"] = self.solution_space_dim
        return out


def _section_constraints(poset: ContextPoset, s: ProbSection, basis: np.ndarray):
    mats, vals = [], []
    for node in sorted(s.domain):
        atoms = poset.atoms_of(node)
        for idx, p in enumerate(atoms):
            mats.append(p.matrix)
            vals.append(float(s.assignment[node].weights[idx]))
    d = poset.dim
    a = _constraint_rows(basis, mats)
    trace_row = np.real(np.einsum("kii->k", basis))
    a = np.vstack([a, trace_row])
    b = np.array(vals + [1.0])
    return a, b


def state_from_section(poset: ContextPoset, s: ProbSection) -> ReconstructionResult:
    """Solve tr(X p) = mu(p) over self-adjoint X with tr X = 1.

    The solve is least squares in a Hermitian basis (n^2 real unknowns).
    An inconsistent system is infeasible; a rank-deficient consistent one
    is underdetermined; a unique solution is a density matrix iff its
    spectrum clears -PSD_TOL.
    """
    d = poset.dim
    basis = hermitian_basis(d)
    a, b = _section_constraints(poset, s, basis)
    x, _, rank, _ = np.linalg.lstsq(a, b, rcond=RANK_TOL)
    residual = max_norm(a @ x - b)
    if residual > RESIDUAL_TOL:
        return ReconstructionResult(
            "infeasible", residual=residual, reason="inconsistent linear system"
        )
    if rank < d * d:
        return ReconstructionResult(
            "underdetermined",
            residual=residual,
            solution_space_dim=d * d - int(rank),
            reason="projection family does not span the self-adjoint operators",
        )
    mat = np.einsum("k,kij->ij", x, basis)
    mat = 0.5 * (mat + mat.conj().T)
    eigs = np.linalg.eigvalsh(mat)
    if eigs.min() < -PSD_TOL:
        return ReconstructionResult(
            "infeasible",
            residual=residual,
            eigenvalues=eigs,
            reason="unique solution has a negative eigenvalue",
        )
    return ReconstructionResult(
        "unique",
        state=density_matrix(mat, tol=1e-7, psd_tol=PSD_TOL),
        residual=residual,
        eigenvalues=eigs,
    )


def is_informationally_complete(poset: ContextPoset) -> bool:
    """Do the registered projections (plus identity) span all Hermitians?"""
    d = poset.dim
    basis = hermitian_basis(d)
    mats = [p.matrix for _, p in poset.registry.items()]
    mats.append(np.eye(d, dtype=complex))
    a = _constraint_rows(basis, mats)
    return int(np.linalg.matrix_rank(a, tol=RANK_TOL)) == d * d


@dataclass(frozen=True)
class Dilation:
    """Per-context Naimark dilation: embedding projections and a unit vector."""

    context: int
    ancilla_dim: int
    embedding: tuple[Projection, ...]
    vector: np.ndarray


def naimark_dilate(m: ContextMeasure) -> Dilation:
    """Dilate a measure to coordinate projections and the sqrt-weight vector."""
    k = len(m.weights)
    embedding = []
    for i in range(k):
        e = np.zeros((k, k), dtype=complex)
        e[i, i] = 1.0
        embedding.append(Projection(e, 1))
    v = np.sqrt(np.asarray(m.weights, dtype=float)).astype(complex)
    v.flags.writeable = False
    return Dilation(m.context, k, tuple(embedding), v)


def recovered_weights(d: Dilation) -> np.ndarray:
    """Weights <v, phi(p_i) v> read back from a dilation."""
    return np.array(
        [float(np.real(np.vdot(d.vector, p.matrix @ d.vector))) for p in d.embedding]
    )


@dataclass
class QuasilinearityReport:
    status: str
    within_context_residual: float
    cross_context_residual: float | None
    linearity_testable: bool
    notes: str

    def to_report(self) -> dict:
        return {
            "status": self.status,
            "within_context_residual": self.within_context_residual,
            "cross_context_residual": self.cross_context_residual,
            "linearity_testable": self.linearity_testable,
            "notes": self.notes,
        }


def measure_value(poset: ContextPoset, m: ContextMeasure, a) -> float:
    """Linear extension of a measure to operators of its context.

    For a = sum A_i p_i over the context's atoms, returns sum A_i w_i.
    """
    atoms = poset.atoms_of(m.context)
    arr = np.asarray(a, dtype=complex)
    value = 0.0
    recon = np.zeros_like(arr)
    for idx, p in enumerate(atoms):
        coeff = float(np.real(np.trace(p.matrix @ arr)) / p.rank)
        value += coeff * float(m.weights[idx])
        recon = recon + coeff * p.matrix
    if max_norm(recon - arr) > 1e-7:
        raise ValueError("operator does not belong to the measure's context")
    return value


def quasilinearity_report(
    poset: ContextPoset,
    s: ProbSection,
    samples: int = 20,
    seed: int = 0,
    tol: float = 1e-8,
) -> QuasilinearityReport:
    """Check linearity of a section: within contexts always, across via state.

    Within each context the extension is linear by construction and the
    residual reflects only floating point noise. Across contexts linearity
    is only testable through a reconstructed state; if reconstruction is
    underdetermined or infeasible the report says so.
    """
    rng = np.random.default_rng(seed)
    within = 0.0
    for node in sorted(s.domain):
        atoms = poset.atoms_of(node)
        m = s.assignment[node]
        for _ in range(max(1, samples // max(1, len(s.domain)))):
            ca = rng.normal(size=len(atoms))
            cb = rng.normal(size=len(atoms))
            a = sum(c * p.matrix for c, p in zip(ca, atoms))
            b = sum(c * p.matrix for c, p in zip(cb, atoms))
            lhs = measure_value(poset, m, a + b)
            rhs = measure_value(poset, m, a) + measure_value(poset, m, b)
            within = max(within, abs(lhs - rhs))
    result = state_from_section(poset, s)
    if result.status != "unique":
        return QuasilinearityReport(
            result.status, within, None, False, "linearity untestable"
        )
    d = poset.dim
    rho = result.state.matrix
    cross = 0.0
    drawn = 0
    while drawn < samples:
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        a = 0.5 * (a + a.conj().T)
        b = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        b = 0.5 * (b + b.conj().T)
        if max_norm(a @ b - b @ a) <= 1e-9:
            continue  # the point is linearity across non-commuting pairs
        lhs = float(np.real(np.trace(rho @ (a + b))))
        rhs = float(np.real(np.trace(rho @ a))) + float(np.real(np.trace(rho @ b)))
        cross = max(cross, abs(lhs - rhs))
        drawn += 1
    ok = within <= tol and cross <= tol
    return QuasilinearityReport(
        "unique", within, cross, True, "" if ok else "linearity residual above tolerance"
    )
