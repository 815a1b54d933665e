"""Spectral presheaf machinery: characters, global sections, KS certificates.

A character of a context picks one atom (the projection it maps to 1);
restriction along an inclusion picks the unique dominating atom. Global
sections are non-contextual 0/1 value assignments. The searcher and the
exhaustive enumerator implement the same constraint semantics, so they can
be played against each other as oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .contexts import ContextPoset, PresheafShape
from .opalg import DEFAULT_TOL, max_norm, spectral_atoms


@dataclass(frozen=True)
class Character:
    """Pure state of one context: the index of the atom sent to 1."""

    context: int
    chosen_atom: int


@dataclass(frozen=True)
class SpectralSection:
    """Compatible choice of a character per node over a down-closed domain."""

    assignment: Mapping[int, Character]
    domain: frozenset[int]

    def value_table(self, poset: ContextPoset) -> dict[str, int]:
        """0/1 value per registered projection key appearing in the domain."""
        table: dict[str, int] = {}
        for node in sorted(self.domain):
            ch = self.assignment[node]
            for idx, key in enumerate(poset.atom_keys(node)):
                table[key] = 1 if idx == ch.chosen_atom else 0
        return table


@dataclass
class ColoringCertificate:
    verdict: str  # "colorable" | "non_colorable"
    section: SpectralSection | None
    nodes_expanded: int
    backtracks: int
    exhausted: bool

    def to_report(self, poset: ContextPoset) -> dict:
        report = {
            "verdict": self.verdict,
            "stats": {
                "nodes_expanded": self.nodes_expanded,
                "backtracks": self.backtracks,
                "exhausted": self.exhausted,
            },
        }
        if self.section is not None:
            report["section"] = self.section.value_table(poset)
        return report


@dataclass
class EnumerationResult:
    sections: list[SpectralSection]
    truncated: bool

    def __iter__(self):
        return iter(self.sections)

    def __len__(self):
        return len(self.sections)


def dominator_index(poset: ContextPoset, small: int, large: int, atom: int) -> int:
    """Index of the atom of ``small`` dominating atom ``atom`` of ``large``."""
    return int(poset.dominator_map(small, large)[atom])


def _domination_maps(poset: ContextPoset) -> dict[tuple[int, int], np.ndarray]:
    """For every strict pair small <= large, the atom dominator lookup."""
    maps: dict[tuple[int, int], np.ndarray] = {}
    n = len(poset)
    for i in range(n):
        for j in range(n):
            if i == j or not poset.order[i, j]:
                continue
            maps[(i, j)] = poset.dominator_map(i, j)
    return maps


def restrict_character(poset: ContextPoset, ch: Character, target: int) -> Character:
    """Restriction of a character to a smaller context."""
    poset.leq(target, ch.context)  # validates the ids
    if target == ch.context:
        return ch
    if not poset.order[target, ch.context]:
        raise ValueError(f"target node {target} is not below context {ch.context}")
    idx = dominator_index(poset, target, ch.context, ch.chosen_atom)
    return Character(target, idx)


def characters_of(poset: ContextPoset, node: int) -> list[Character]:
    return [Character(node, a) for a in range(len(poset.nodes[node].atoms))]


def spectral_shape(poset: ContextPoset) -> PresheafShape:
    sizes = tuple(len(node.atoms) for node in poset.nodes)

    def restrict(ch: Character, large: int, small: int) -> Character:
        assert ch.context == large
        return restrict_character(poset, ch, small)

    return PresheafShape(poset, sizes, restrict)


class _Conflict(Exception):
    pass


class _SearchState:
    """Forced characters, projection values and maximal-node domains."""

    __slots__ = ("chars", "value", "domains")

    def __init__(self, chars, value, domains):
        self.chars = chars
        self.value = value
        self.domains = domains

    def copy(self) -> "_SearchState":
        return _SearchState(
            dict(self.chars), dict(self.value), {k: set(v) for k, v in self.domains.items()}
        )


def _sharing_order(poset: ContextPoset, node_ids: list[int]) -> list[int]:
    """Sort by descending degree in the projection-sharing graph, ties by id."""
    keysets = {i: set(poset.atom_keys(i)) for i in range(len(poset))}
    degree = {}
    for i in node_ids:
        degree[i] = sum(
            1 for j in range(len(poset)) if j != i and keysets[i] & keysets[j]
        )
    return sorted(node_ids, key=lambda i: (-degree[i], i))


def find_global_section(poset: ContextPoset) -> ColoringCertificate:
    """Backtracking search for a global section of the spectral presheaf.

    Choices are made at maximal nodes (they determine the whole section);
    propagation maintains a 0/1 table over registered projections: the
    chosen atom forces its context siblings to 0, a projection forced to 1
    forces the character of every context it generates, and a maximal node
    with all-but-one atom at 0 is assigned the remaining atom.
    """
    if poset.dim < 2:
        raise ValueError("global-section search needs dimension >= 2")
    dom = _domination_maps(poset)
    n = len(poset)
    maximal = poset.maximal_nodes()
    order_vars = _sharing_order(poset, maximal)
    below: dict[int, list[int]] = {m: [i for i in range(n) if poset.order[i, m]] for m in maximal}
    occurrences: dict[str, list[tuple[int, int]]] = {}
    for i in range(n):
        for idx, key in enumerate(poset.atom_keys(i)):
            occurrences.setdefault(key, []).append((i, idx))
    parents: dict[int, list[int]] = {
        i: [m for m in maximal if poset.order[i, m]] for i in range(n)
    }

    stats = {"expanded": 0, "backtracks": 0}

    def set_value(state: _SearchState, key: str, bit: int, queue: list) -> None:
        prev = state.value.get(key)
        if prev is not None:
            if prev != bit:
                raise _Conflict
            return
        state.value[key] = bit
        for node, idx in occurrences[key]:
            if node in state.domains:  # unassigned maximal node
                domain = state.domains[node]
                if bit == 1:
                    if idx not in domain:
                        raise _Conflict
                    domain.intersection_update({idx})
                else:
                    domain.discard(idx)
                if not domain:
                    raise _Conflict
                if len(domain) == 1:
                    queue.append((node, next(iter(domain))))
            elif bit == 1 and node not in state.chars:
                queue.append(("char", node, idx))
            elif bit == 1 and state.chars.get(node) != idx:
                raise _Conflict

    def set_char(state: _SearchState, node: int, atom: int, queue: list) -> None:
        prev = state.chars.get(node)
        if prev is not None:
            if prev != atom:
                raise _Conflict
            return
        state.chars[node] = atom
        for idx, key in enumerate(poset.atom_keys(node)):
            set_value(state, key, 1 if idx == atom else 0, queue)
        # prune unassigned maximal parents to choices restricting onto this atom
        for m in parents[node]:
            if m not in state.domains:
                continue
            allowed = {a for a in state.domains[m] if dom[(node, m)][a] == atom}
            if not allowed:
                raise _Conflict
            if allowed != state.domains[m]:
                state.domains[m] = allowed
                if len(allowed) == 1:
                    queue.append((m, next(iter(allowed))))

    def assign(state: _SearchState, m: int, atom: int) -> None:
        queue: list = [(m, atom)]
        while queue:
            item = queue.pop()
            if item[0] == "char":
                _, node, idx = item
                set_char(state, node, idx, queue)
                continue
            node, a = item
            if node not in state.domains:
                if state.chars.get(node) != a:
                    raise _Conflict
                continue
            if a not in state.domains[node]:
                raise _Conflict
            del state.domains[node]
            for i in below[node]:
                target = dom[(i, node)][a] if i != node else a
                set_char(state, i, int(target), queue)

    def solve(state: _SearchState) -> _SearchState | None:
        pending = [m for m in order_vars if m in state.domains]
        if not pending:
            return state
        m = pending[0]
        for atom in sorted(state.domains[m]):
            child = state.copy()
            stats["expanded"] += 1
            try:
                assign(child, m, atom)
            except _Conflict:
                stats["backtracks"] += 1
                continue
            result = solve(child)
            if result is not None:
                return result
            stats["backtracks"] += 1
        return None

    initial = _SearchState(
        {}, {}, {m: set(range(len(poset.nodes[m].atoms))) for m in maximal}
    )
    found = solve(initial)
    if found is None:
        return ColoringCertificate(
            "non_colorable", None, stats["expanded"], stats["backtracks"], exhausted=True
        )
    assignment = {i: Character(i, found.chars[i]) for i in range(n)}
    section = SpectralSection(assignment, frozenset(range(n)))
    return ColoringCertificate(
        "colorable", section, stats["expanded"], stats["backtracks"], exhausted=False
    )


def enumerate_global_sections(
    poset: ContextPoset, cap: int = 10**6, chunk: int = 1 << 16
) -> EnumerationResult:
    """Exhaustive enumeration of global sections, up to ``cap`` results.

    Raw choice tuples range over the maximal nodes only; a tuple survives
    iff all maximal nodes above each lower node restrict onto the same
    character there. This is the independent oracle behind
    :func:`find_global_section`.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    dom = _domination_maps(poset)
    n = len(poset)
    maximal = sorted(poset.maximal_nodes())
    counts = [len(poset.nodes[m].atoms) for m in maximal]
    raw = math.prod(counts) if counts else 1
    if raw > 10**8:
        raise ValueError(f"raw choice space {raw} too large to enumerate")
    pos = {m: t for t, m in enumerate(maximal)}
    checks = []
    for i in range(n):
        ups = [m for m in maximal if i != m and poset.order[i, m]]
        if len(ups) >= 2:
            checks.append((i, ups))

    sections: list[SpectralSection] = []
    truncated = False
    for start in range(0, raw, chunk):
        stop = min(start + chunk, raw)
        flat = np.arange(start, stop, dtype=np.int64)
        combos = np.empty((flat.size, len(maximal)), dtype=np.int64)
        rem = flat
        for t in range(len(maximal) - 1, -1, -1):
            combos[:, t] = rem % counts[t]
            rem = rem // counts[t]
        mask = np.ones(flat.size, dtype=bool)
        for i, ups in checks:
            ref = dom[(i, ups[0])][combos[:, pos[ups[0]]]]
            for m in ups[1:]:
                mask &= dom[(i, m)][combos[:, pos[m]]] == ref
        for row in combos[mask]:
            assignment: dict[int, Character] = {}
            for t, m in enumerate(maximal):
                assignment[m] = Character(m, int(row[t]))
            for i in range(n):
                if i in assignment:
                    continue
                ups = [m for m in maximal if poset.order[i, m] and i != m]
                a = dom[(i, ups[0])][int(row[pos[ups[0]]])]
                assignment[i] = Character(i, int(a))
            sections.append(SpectralSection(assignment, frozenset(range(n))))
            if len(sections) > cap:
                truncated = True
                sections.pop()
                break
        if truncated:
            break
    sections.sort(key=lambda s: tuple(s.assignment[i].chosen_atom for i in range(n)))
    return EnumerationResult(sections, truncated)


def verify_section(poset: ContextPoset, s: SpectralSection) -> bool:
    """Exact check of both section invariants.

    (1) Along every inclusion in the domain, the character of the smaller
    context is the restriction of the larger one. (2) A projection that is
    an atom of several domain contexts gets one value everywhere.
    Also requires the domain to be down-closed and choices in range.
    """
    n = len(poset)
    for node in s.domain:
        if not (0 <= node < n):
            return False
        ch = s.assignment.get(node)
        if ch is None or ch.context != node:
            return False
        if not (0 <= ch.chosen_atom < len(poset.nodes[node].atoms)):
            return False
        for i in range(n):
            if poset.order[i, node] and i not in s.domain:
                return False
    for i in s.domain:
        for j in s.domain:
            if i == j or not poset.order[i, j]:
                continue
            want = dominator_index(poset, i, j, s.assignment[j].chosen_atom)
            if s.assignment[i].chosen_atom != want:
                return False
    values: dict[str, int] = {}
    for node in s.domain:
        chosen = s.assignment[node].chosen_atom
        for idx, key in enumerate(poset.atom_keys(node)):
            bit = 1 if idx == chosen else 0
            if values.setdefault(key, bit) != bit:
                return False
    return True


def character_value(poset: ContextPoset, ch: Character, a, tol: float = DEFAULT_TOL) -> float:
    """Value the character assigns to an operator of its context.

    ``a`` must be constant on the context's atoms; the value is the
    eigenvalue of ``a`` on the chosen atom.
    """
    atoms = poset.atoms_of(ch.context)
    arr = np.asarray(a, dtype=complex)
    recon = np.zeros_like(arr)
    coeffs = []
    for p in atoms:
        coeff = float(np.real(np.trace(p.matrix @ arr)) / p.rank)
        coeffs.append(coeff)
        recon = recon + coeff * p.matrix
    if max_norm(recon - arr) > max(100 * tol, 1e-7):
        raise ValueError("operator does not belong to the chosen context")
    return coeffs[ch.chosen_atom]


def is_spectral_function(c, a, tol: float = DEFAULT_TOL) -> bool:
    """True iff ``c`` is constant on each spectral atom of ``a``."""
    atoms = spectral_atoms(a, tol)
    arr = np.asarray(c, dtype=complex)
    recon = np.zeros_like(arr)
    for _, p in atoms:
        coeff = np.trace(p.matrix @ arr) / p.rank
        recon = recon + coeff * p.matrix
    return max_norm(recon - arr) <= max(100 * tol, 1e-7)


def ks_triple_check(a, b, c, tol: float = DEFAULT_TOL) -> bool:
    """Whether c is a spectral function of a and of b (a, b need not commute)."""
    for m in (a, b, c):
        arr = np.asarray(m, dtype=complex)
        if max_norm(arr - arr.conj().T) > tol:
            raise ValueError("ks_triple_check requires self-adjoint inputs")
    shapes = {np.asarray(m).shape for m in (a, b, c)}
    if len(shapes) != 1:
        raise ValueError("ks_triple_check requires equal dimensions")
    return is_spectral_function(c, a, tol) and is_spectral_function(c, b, tol)
