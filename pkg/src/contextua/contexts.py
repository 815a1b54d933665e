"""Context posets: finite fragments of the poset of commutative subalgebras.

A context is an orthogonal family of atomic projections summing to the
identity. The poset generated by a catalog of contexts is the downward
closure of the catalog: every partition-coarsening of every catalog
context, plus the trivial context, ordered by "each atom of the smaller
is a sum of atoms of the larger".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .opalg import (
    DEFAULT_TOL,
    Projection,
    ProjectionRegistry,
    as_operator,
    cluster_eigenvalues,
    commutes,
    identity_projection,
    max_norm,
    projection,
)

# Threshold for "atom p lies under atom q" tests; products of unit-scale
# projections either vanish or miss by a geometric gap, so this is lax
# relative to tol but far below any genuine mismatch.
DOMINANCE_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class Context:
    """One commutative subalgebra, presented by its ordered atom keys."""

    dim: int
    atoms: tuple[str, ...]

    def __post_init__(self):
        if len(self.atoms) < 1:
            raise ValueError("a context needs at least one atom")

    @property
    def key_set(self) -> frozenset[str]:
        return frozenset(self.atoms)

    # Context identity is the atom key-set; atom order is presentation only.
    def __eq__(self, other) -> bool:
        if not isinstance(other, Context):
            return NotImplemented
        return self.dim == other.dim and self.key_set == other.key_set

    def __hash__(self) -> int:
        return hash((self.dim, self.key_set))


def context_from_projections(
    registry: ProjectionRegistry,
    mats: Sequence,
    tol: float = DEFAULT_TOL,
) -> Context:
    """Validate an orthogonal, complete family and register it as a context."""
    projs = [p if isinstance(p, Projection) else projection(p, tol) for p in mats]
    dim = registry.dim
    for p in projs:
        if p.dim != dim:
            raise ValueError("atom dimension does not match registry")
    for i, p in enumerate(projs):
        for j, q in enumerate(projs):
            expected = p.matrix if i == j else 0.0
            if max_norm(p.matrix @ q.matrix - expected) > max(tol, DOMINANCE_TOL / 10):
                raise ValueError(f"atoms {i} and {j} are not orthogonal")
    total = sum(p.matrix for p in projs)
    if max_norm(total - np.eye(dim)) > max(tol * dim, DOMINANCE_TOL / 10):
        raise ValueError("atoms do not sum to the identity")
    keys = tuple(registry.register(p) for p in projs)
    return Context(dim, keys)


def context_from_observables(
    registry: ProjectionRegistry,
    ops: Sequence,
    tol: float = DEFAULT_TOL,
) -> Context:
    """Smallest context containing every operator in ``ops``.

    The atoms are the common refinement of the spectral atoms of all the
    operators, computed by iteratively splitting joint eigenspaces. All
    operators must be self-adjoint and pairwise commuting.
    """
    if not ops:
        raise ValueError("need at least one observable")
    arrs = [as_operator(a) for a in ops]
    dim = arrs[0].shape[0]
    if dim != registry.dim:
        raise ValueError("observable dimension does not match registry")
    for idx, a in enumerate(arrs):
        if a.shape[0] != dim:
            raise ValueError("observables must share one dimension")
        if max_norm(a - a.conj().T) > tol:
            raise ValueError(f"observable {idx} is not self-adjoint")
    for i in range(len(arrs)):
        for j in range(i + 1, len(arrs)):
            if not commutes(arrs[i], arrs[j], max(tol, DOMINANCE_TOL / 10)):
                raise ValueError(f"observables {i} and {j} do not commute")

    blocks = [np.eye(dim, dtype=complex)]
    for a in arrs:
        refined = []
        for basis in blocks:
            compressed = basis.conj().T @ a @ basis
            compressed = 0.5 * (compressed + compressed.conj().T)
            evals, vecs = np.linalg.eigh(compressed)
            for group in cluster_eigenvalues(evals):
                refined.append(basis @ vecs[:, group])
        blocks = refined
    atoms = [Projection(b @ b.conj().T, b.shape[1]) for b in blocks]
    atoms = [projection(p.matrix, max(tol, 1e-10)) for p in atoms]
    return context_from_projections(registry, atoms, tol)


def trivial_context(registry: ProjectionRegistry) -> Context:
    key = registry.register(identity_projection(registry.dim))
    return Context(registry.dim, (key,))


def _set_partitions(items: Sequence[int]) -> Iterator[list[list[int]]]:
    """All partitions of ``items`` into nonempty blocks."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part


def _coarsen(registry: ProjectionRegistry, ctx: Context, blocks: list[list[int]]) -> Context:
    atom_mats = [registry.get(k).matrix for k in ctx.atoms]
    coarse = []
    for block in blocks:
        total = sum(atom_mats[i] for i in block)
        rank = sum(registry.get(ctx.atoms[i]).rank for i in block)
        coarse.append(Projection(total, rank))
    keys = tuple(registry.register(p) for p in coarse)
    return Context(ctx.dim, keys)


@dataclass
class ContextPoset:
    """Finite poset of contexts. Immutable once built; safe to share."""

    dim: int
    registry: ProjectionRegistry
    nodes: tuple[Context, ...]
    order: np.ndarray  # order[i, j] == True iff node i is contained in node j
    generators: tuple[str, ...]
    tol: float = DEFAULT_TOL
    _covers: tuple[tuple[int, int], ...] | None = field(default=None, repr=False)
    _dominators: dict | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.nodes)

    def dominator_map(self, small: int, large: int) -> np.ndarray:
        """Per-atom lookup: atom a of ``large`` lies under entry [a] of ``small``."""
        if self._dominators is None:
            self._dominators = {}
        key = (small, large)
        cached = self._dominators.get(key)
        if cached is not None:
            return cached
        if not self.order[small, large]:
            raise ValueError(f"node {small} is not below node {large}")
        fine = np.stack([p.matrix for p in self.atoms_of(large)])
        out = np.full(len(fine), -1, dtype=np.int64)
        for idx, q in enumerate(self.atoms_of(small)):
            resid = np.abs(np.einsum("ij,njk->nik", q.matrix, fine) - fine).max(axis=(1, 2))
            out[resid <= DOMINANCE_TOL] = idx
        if np.any(out < 0):
            raise RuntimeError("no dominating atom found; poset data is inconsistent")
        self._dominators[key] = out
        return out

    def node_id(self, ctx: Context) -> int:
        for i, node in enumerate(self.nodes):
            if node == ctx:
                return i
        raise KeyError("context not in poset")

    def atoms_of(self, i: int) -> list[Projection]:
        return [self.registry.get(k) for k in self.nodes[i].atoms]

    def atom_keys(self, i: int) -> tuple[str, ...]:
        return self.nodes[i].atoms

    def leq(self, i: int, j: int) -> bool:
        self._check_id(i)
        self._check_id(j)
        return bool(self.order[i, j])

    def _check_id(self, i: int) -> None:
        if not (isinstance(i, (int, np.integer)) and 0 <= i < len(self.nodes)):
            raise KeyError(f"unknown node id {i!r}")

    def maximal_nodes(self) -> list[int]:
        n = len(self.nodes)
        return [i for i in range(n) if not any(self.order[i, j] and i != j for j in range(n))]

    def trivial_node(self) -> int:
        for i, node in enumerate(self.nodes):
            if len(node.atoms) == 1:
                return i
        raise KeyError("poset has no trivial node")

    def covers(self) -> tuple[tuple[int, int], ...]:
        """Transitive reduction as (small, large) pairs."""
        if self._covers is None:
            n = len(self.nodes)
            pairs = []
            for i in range(n):
                for j in range(n):
                    if i == j or not self.order[i, j]:
                        continue
                    if any(
                        self.order[i, k] and self.order[k, j] and k not in (i, j)
                        for k in range(n)
                    ):
                        continue
                    pairs.append((i, j))
            self._covers = tuple(pairs)
        return self._covers

    def down_set(self, j: int) -> list[int]:
        self._check_id(j)
        return [i for i in range(len(self.nodes)) if self.order[i, j]]

    def up_set(self, i: int) -> list[int]:
        self._check_id(i)
        return [j for j in range(len(self.nodes)) if self.order[i, j]]

    def chains3(self) -> list[tuple[int, int, int]]:
        """All chains i < j < k (strict), for functoriality checks."""
        n = len(self.nodes)
        out = []
        for i in range(n):
            for j in range(n):
                if i == j or not self.order[i, j]:
                    continue
                for k in range(n):
                    if k in (i, j) or not self.order[j, k]:
                        continue
                    out.append((i, j, k))
        return out


def atom_sum_leq(
    registry: ProjectionRegistry,
    small: Context,
    large: Context,
    tol: float = DEFAULT_TOL,
) -> bool:
    """True iff every atom of ``small`` is a sum of atoms of ``large``."""
    large_mats = [registry.get(k).matrix for k in large.atoms]
    for key in small.atoms:
        q = registry.get(key).matrix
        under = [p for p in large_mats if max_norm(q @ p - p) <= DOMINANCE_TOL]
        total = sum(under) if under else np.zeros_like(q)
        if max_norm(total - q) > max(tol * small.dim, DOMINANCE_TOL):
            return False
    return True


def generate_poset(
    catalog: Sequence[Context],
    registry: ProjectionRegistry,
    tol: float = DEFAULT_TOL,
) -> ContextPoset:
    """Downward-closed poset generated by the catalog.

    Nodes are every partition-coarsening of every catalog context plus the
    trivial context; the closure is therefore stable under pairwise meets
    (the meet of two stored contexts is a common coarsening of both).
    """
    dim = registry.dim
    for ctx in catalog:
        if ctx.dim != dim:
            raise ValueError("mixed dimensions in catalog")

    nodes: list[Context] = []
    provenance: list[str] = []
    seen: dict[frozenset[str], int] = {}

    def add(ctx: Context, origin: str) -> None:
        ks = ctx.key_set
        if ks in seen:
            return
        seen[ks] = len(nodes)
        nodes.append(ctx)
        provenance.append(origin)

    for idx, ctx in enumerate(catalog):
        add(ctx, f"catalog[{idx}]")
        indices = list(range(len(ctx.atoms)))
        for blocks in _set_partitions(indices):
            if len(blocks) == len(indices):
                continue  # the context itself
            coarse = _coarsen(registry, ctx, [sorted(b) for b in blocks])
            add(coarse, f"coarsening of catalog[{idx}]")
    add(trivial_context(registry), "trivial")

    order = _order_matrix(registry, nodes)
    n = len(nodes)
    # sanity: antisymmetry must hold because distinct key-sets are distinct algebras
    both = order & order.T
    if not np.array_equal(both, np.eye(n, dtype=bool)):
        raise RuntimeError("order relation failed antisymmetry")
    return ContextPoset(dim, registry, tuple(nodes), order, tuple(provenance), tol)


def _order_matrix(registry: ProjectionRegistry, nodes: list[Context]) -> np.ndarray:
    """Order matrix via a precomputed dominance table over registered atoms.

    i <= j iff, for every atom q of i, the ranks of j's atoms lying under q
    sum to rank(q). Distinct atoms of i are orthogonal, so a j-atom can sit
    under at most one of them; a full rank count per atom therefore means
    every atom of i is exactly the sum of its dominated j-atoms.
    """
    keys = sorted({k for node in nodes for k in node.atoms})
    key_idx = {k: t for t, k in enumerate(keys)}
    stack = np.stack([registry.get(k).matrix for k in keys])
    ranks = np.array([registry.get(k).rank for k in keys])
    prod = np.einsum("aij,bjk->abik", stack, stack)
    dominates = (
        np.abs(prod - stack[None, :, :, :]).max(axis=(2, 3)) <= DOMINANCE_TOL
    )
    node_atoms = [np.array([key_idx[k] for k in node.atoms]) for node in nodes]
    n = len(nodes)
    order = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            if i == j:
                order[i, j] = True
                continue
            if len(node_atoms[i]) > len(node_atoms[j]):
                continue
            cols = node_atoms[j]
            order[i, j] = all(
                int(ranks[cols[dominates[q, cols]]].sum()) == ranks[q]
                for q in node_atoms[i]
            )
    return order


def leq(poset: ContextPoset, i: int, j: int) -> bool:
    """Containment test between stored nodes; unknown ids raise KeyError."""
    return poset.leq(i, j)


def meet_node(poset: ContextPoset, i: int, j: int) -> int:
    """Order-theoretic greatest lower bound of two stored nodes."""
    lowers = [k for k in range(len(poset)) if poset.order[k, i] and poset.order[k, j]]
    best = [k for k in lowers if all(poset.order[m, k] for m in lowers)]
    if len(best) != 1:
        raise RuntimeError("stored poset has no unique greatest lower bound")
    return best[0]


def export_dot(poset: ContextPoset) -> str:
    """DOT digraph of the transitive reduction.

    Arrows are drawn large -> small so maximal contexts sit on top in the
    usual Hasse layout; node provenance appears as // comments.
    """
    lines = ["digraph contexts {"]
    for i, node in enumerate(poset.nodes):
        ranks = ",".join(str(poset.registry.get(k).rank) for k in node.atoms)
        lines.append(f"  // node n{i}: {poset.generators[i]}")
        lines.append(f'  n{i} [label="ranks={ranks}"];')
    for small, large in poset.covers():
        lines.append(f"  n{large} -> n{small};")
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PresheafShape:
    """Shape data of a presheaf over a stored poset.

    ``component_size`` gives the cardinality descriptor per node (or -1 for
    infinite components such as measure simplices); ``restrict`` maps an
    element at node j to its image at node i whenever i <= j.
    """

    poset: ContextPoset
    component_size: tuple[int, ...]
    restrict: Callable

    def check_functoriality(self, elements_of: Callable[[int], Iterable]) -> int:
        """Exhaustively verify restriction composition on all 3-chains.

        ``elements_of(k)`` yields the component elements (or samples) at the
        top node of each chain. Returns the number of checked triples;
        raises AssertionError on a violation.
        """
        checked = 0
        for i, j, k in self.poset.chains3():
            for x in elements_of(k):
                via = self.restrict(self.restrict(x, k, j), j, i)
                direct = self.restrict(x, k, i)
                if not _elements_equal(via, direct):
                    raise AssertionError(
                        f"functoriality violated along chain {i} <= {j} <= {k}"
                    )
                checked += 1
        return checked


def _elements_equal(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.allclose(a, b, atol=1e-10)
    if hasattr(a, "weights") and hasattr(b, "weights"):
        return a.context == b.context and np.allclose(a.weights, b.weights, atol=1e-10)
    return a == b
