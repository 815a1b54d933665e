"""Scenario ingestion: JSON documents describing rays, contexts and states.

Complex entries are written as plain numbers, as [re, im] pairs, or as
exact-form strings ("a/b", "sqrt(c)", "sqrt(c)/d", optionally signed);
surd catalogs can therefore keep their textual provenance. All rays are
normalized on ingest, every context is orthogonality-checked, and a
context whose ranks do not fill the dimension is padded with the
orthogonal-complement projection.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .bell import BellSection, CorrelationTable, ProductNode, ProductPoset, product_poset
from .contexts import Context, ContextPoset, generate_poset
from .opalg import (
    CANONICAL_GRID,
    CanonicalizationError,
    Projection,
    ProjectionRegistry,
    max_norm,
    projection_from_ray,
    ray,
)

INGEST_TOL = 1e-9

_FRACTION = re.compile(r"^(-?\d+)\s*/\s*(\d+)$")
_SQRT = re.compile(r"^(-?)sqrt\((\d+)\)(?:\s*/\s*(\d+))?$")
_DECIMAL = re.compile(r"^-?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class ScenarioError(ValueError):
    """Schema or validation failure, annotated with the JSON path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def parse_real(token, path: str) -> float:
    if isinstance(token, (int, float)) and not isinstance(token, bool):
        return float(token)
    if isinstance(token, str):
        text = token.strip()
        m = _FRACTION.match(text)
        if m:
            num, den = int(m.group(1)), int(m.group(2))
            if den == 0:
                raise ScenarioError(path, "division by zero in exact form")
            return num / den
        m = _SQRT.match(text)
        if m:
            sign = -1.0 if m.group(1) == "-" else 1.0
            root = math.sqrt(int(m.group(2)))
            den = int(m.group(3)) if m.group(3) else 1
            if den == 0:
                raise ScenarioError(path, "division by zero in exact form")
            return sign * root / den
        if _DECIMAL.match(text):
            return float(text)
        raise ScenarioError(path, f"unrecognized numeric form {token!r}")
    raise ScenarioError(path, f"expected a number or exact-form string, got {type(token).__name__}")


def parse_entry(entry, path: str) -> complex:
    if isinstance(entry, (int, float, str)) and not isinstance(entry, bool):
        return complex(parse_real(entry, path), 0.0)
    if isinstance(entry, list):
        if len(entry) != 2:
            raise ScenarioError(path, f"[re, im] pair must have 2 parts, got {len(entry)}")
        return complex(parse_real(entry[0], path + "[0]"), parse_real(entry[1], path + "[1]"))
    raise ScenarioError(path, "entry must be a number, string, or [re, im] pair")


def _parse_vector(raw, dim: int, path: str) -> np.ndarray:
    if not isinstance(raw, list):
        raise ScenarioError(path, "vector must be a list")
    if len(raw) != dim:
        raise ScenarioError(path, f"vector length {len(raw)} does not match dim {dim}")
    return np.array([parse_entry(e, f"{path}[{i}]") for i, e in enumerate(raw)])


def _parse_matrix(raw, dim: int, path: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != dim:
        raise ScenarioError(path, f"matrix must be a {dim}x{dim} array")
    return np.stack([_parse_vector(row, dim, f"{path}[{i}]") for i, row in enumerate(raw)])


def _parse_rays(raw, dim: int, path: str) -> list[np.ndarray]:
    if not isinstance(raw, list) or not raw:
        raise ScenarioError(path, "rays must be a nonempty list")
    out = []
    for i, item in enumerate(raw):
        vec = _parse_vector(item, dim, f"{path}[{i}]")
        try:
            out.append(ray(vec, INGEST_TOL).vector)
        except ValueError as exc:
            raise ScenarioError(f"{path}[{i}]", str(exc)) from None
    return out


def _check_ray_grid(rays: list[np.ndarray], path: str) -> None:
    """Reject ray pairs whose projections sit below the canonical grid."""
    projs = [projection_from_ray(ray(v)).matrix for v in rays]
    for i in range(len(projs)):
        for j in range(i + 1, len(projs)):
            dist = max_norm(projs[i] - projs[j])
            if INGEST_TOL < dist < CANONICAL_GRID:
                raise ScenarioError(
                    path, f"rays {i} and {j} are near-duplicates below the canonicalization grid"
                )


def _parse_contexts(raw, n_rays: int, rays: list[np.ndarray], path: str) -> list[tuple[int, ...]]:
    if not isinstance(raw, list) or not raw:
        raise ScenarioError(path, "contexts must be a nonempty list")
    out = []
    for c, item in enumerate(raw):
        if not isinstance(item, list) or not item:
            raise ScenarioError(f"{path}[{c}]", "context must be a nonempty list of ray indices")
        for k, idx in enumerate(item):
            if not isinstance(idx, int) or isinstance(idx, bool) or not (0 <= idx < n_rays):
                raise ScenarioError(f"{path}[{c}][{k}]", f"ray index {idx!r} out of range")
        if len(set(item)) != len(item):
            raise ScenarioError(f"{path}[{c}]", "repeated ray index in context")
        for a in range(len(item)):
            for b in range(a + 1, len(item)):
                overlap = abs(np.vdot(rays[item[a]], rays[item[b]]))
                if overlap > INGEST_TOL:
                    raise ScenarioError(
                        f"{path}[{c}]",
                        f"rays {item[a]} and {item[b]} are not orthogonal "
                        f"(|<u,v>| = {overlap:.3e})",
                    )
        out.append(tuple(item))
    return out


@dataclass(frozen=True)
class Scenario:
    kind: str
    dims: tuple[int, ...]
    rays: dict
    contexts: dict
    product_contexts: tuple[tuple[int, int], ...] | None
    state: np.ndarray | None
    tables: tuple | None
    section: tuple | None
    metadata: dict
    document: dict = field(repr=False)

    def digest(self) -> str:
        canon = json.dumps(self.document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("$", "document must be a JSON object")
    kind = doc.get("kind")
    if kind not in ("single", "bipartite"):
        raise ScenarioError("$.kind", f"kind must be 'single' or 'bipartite', got {kind!r}")
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise ScenarioError("$.metadata", "metadata must be an object")

    if kind == "single":
        dim = doc.get("dim")
        if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
            raise ScenarioError("$.dim", f"dim must be a positive integer, got {dim!r}")
        rays = _parse_rays(doc.get("rays"), dim, "$.rays")
        _check_ray_grid(rays, "$.rays")
        contexts = _parse_contexts(doc.get("contexts"), len(rays), rays, "$.contexts")
        for c, ctx in enumerate(contexts):
            if len(ctx) > dim:
                raise ScenarioError(f"$.contexts[{c}]", "more rays than the dimension allows")
        state = None
        if "state" in doc:
            state = _parse_matrix(doc["state"], dim, "$.state")
        section = None
        if "section" in doc:
            raw = doc["section"]
            if not isinstance(raw, list):
                raise ScenarioError("$.section", "section must be a list")
            entries = []
            for i, item in enumerate(raw):
                if not isinstance(item, dict) or "context" not in item or "weights" not in item:
                    raise ScenarioError(
                        f"$.section[{i}]", "each entry needs 'context' and 'weights'"
                    )
                w = [parse_real(x, f"$.section[{i}].weights[{k}]") for k, x in enumerate(item["weights"])]
                entries.append((item["context"], np.array(w)))
            section = tuple(entries)
        return Scenario(
            "single", (dim,), {"main": rays}, {"main": contexts},
            None, state, None, section, metadata, doc,
        )

    dims = doc.get("dims")
    if (
        not isinstance(dims, list)
        or len(dims) != 2
        or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in dims)
    ):
        raise ScenarioError("$.dims", f"dims must be a pair of positive integers, got {dims!r}")
    d1, d2 = dims
    rays_doc = doc.get("rays")
    if not isinstance(rays_doc, dict) or set(rays_doc) != {"left", "right"}:
        raise ScenarioError("$.rays", "bipartite rays must be an object with 'left' and 'right'")
    left_rays = _parse_rays(rays_doc["left"], d1, "$.rays.left")
    right_rays = _parse_rays(rays_doc["right"], d2, "$.rays.right")
    _check_ray_grid(left_rays, "$.rays.left")
    _check_ray_grid(right_rays, "$.rays.right")
    ctx_doc = doc.get("contexts")
    if not isinstance(ctx_doc, dict) or set(ctx_doc) != {"left", "right"}:
        raise ScenarioError("$.contexts", "bipartite contexts must be an object with 'left' and 'right'")
    left_ctx = _parse_contexts(ctx_doc["left"], len(left_rays), left_rays, "$.contexts.left")
    right_ctx = _parse_contexts(ctx_doc["right"], len(right_rays), right_rays, "$.contexts.right")
    product = None
    if "product_contexts" in doc:
        raw = doc["product_contexts"]
        if not isinstance(raw, list):
            raise ScenarioError("$.product_contexts", "must be a list of [left, right] pairs")
        pairs = []
        for i, item in enumerate(raw):
            if (
                not isinstance(item, list)
                or len(item) != 2
                or not (0 <= item[0] < len(left_ctx))
                or not (0 <= item[1] < len(right_ctx))
            ):
                raise ScenarioError(f"$.product_contexts[{i}]", f"invalid pair {item!r}")
            pairs.append((item[0], item[1]))
        product = tuple(pairs)
    state = None
    if "state" in doc:
        state = _parse_matrix(doc["state"], d1 * d2, "$.state")
    tables = None
    if "tables" in doc:
        raw = doc["tables"]
        if not isinstance(raw, list):
            raise ScenarioError("$.tables", "tables must be a list")
        entries = []
        for i, item in enumerate(raw):
            if not isinstance(item, dict) or not {"left", "right", "probs"} <= set(item):
                raise ScenarioError(f"$.tables[{i}]", "each table needs 'left', 'right', 'probs'")
            li, ri = item["left"], item["right"]
            if not (0 <= li < len(left_ctx) and 0 <= ri < len(right_ctx)):
                raise ScenarioError(f"$.tables[{i}]", f"context pair ({li}, {ri}) out of range")
            probs = np.array(
                [
                    [parse_real(x, f"$.tables[{i}].probs[{r}][{c}]") for c, x in enumerate(row)]
                    for r, row in enumerate(item["probs"])
                ]
            )
            entries.append((li, ri, probs))
        tables = tuple(entries)
    return Scenario(
        "bipartite", (d1, d2), {"left": left_rays, "right": right_rays},
        {"left": left_ctx, "right": right_ctx}, product, state, tables, None, metadata, doc,
    )


def emit_scenario(sc: Scenario) -> str:
    """Re-emit the normalized document; parses back to a structurally equal scenario."""
    return json.dumps(sc.document, indent=2, sort_keys=True) + "\n"


def _context_from_ray_indices(
    registry: ProjectionRegistry, rays: list[np.ndarray], indices: tuple[int, ...]
) -> Context:
    dim = registry.dim
    atoms = [projection_from_ray(ray(rays[i])) for i in indices]
    total = sum(p.matrix for p in atoms)
    rank = sum(p.rank for p in atoms)
    if rank < dim:
        comp = np.eye(dim) - total
        atoms.append(Projection(comp, dim - rank))
    keys = tuple(registry.register(p) for p in atoms)
    return Context(dim, keys)


def _catalog(
    rays: list[np.ndarray],
    contexts: list[tuple[int, ...]],
    dim: int,
    path: str,
    tol: float = INGEST_TOL,
) -> tuple[ProjectionRegistry, list[Context]]:
    registry = ProjectionRegistry(dim, tol)
    catalog = []
    for c, indices in enumerate(contexts):
        try:
            catalog.append(_context_from_ray_indices(registry, rays, indices))
        except CanonicalizationError as exc:
            raise ScenarioError(f"{path}[{c}]", str(exc)) from None
    return registry, catalog


@dataclass
class SingleModel:
    """A single-system scenario realized as a poset, with catalog node ids."""

    poset: ContextPoset
    catalog_nodes: list[int]


def build_single_model(sc: Scenario, tol: float = INGEST_TOL) -> SingleModel:
    if sc.kind != "single":
        raise ValueError("expected a single-system scenario")
    registry, catalog = _catalog(
        sc.rays["main"], sc.contexts["main"], sc.dims[0], "$.contexts", tol
    )
    poset = generate_poset(catalog, registry, tol)
    return SingleModel(poset, [poset.node_id(c) for c in catalog])


def build_single_poset(sc: Scenario, tol: float = INGEST_TOL) -> ContextPoset:
    return build_single_model(sc, tol).poset


@dataclass
class BipartiteModel:
    """Everything a bipartite command needs: posets, section, analysis contexts."""

    poset: ProductPoset
    section: BellSection | None
    analysis_contexts: list[ProductNode]
    left_catalog_nodes: list[int]
    right_catalog_nodes: list[int]


def build_bipartite_model(sc: Scenario, tol: float = INGEST_TOL) -> BipartiteModel:
    if sc.kind != "bipartite":
        raise ValueError("expected a bipartite scenario")
    lreg, lcat = _catalog(sc.rays["left"], sc.contexts["left"], sc.dims[0], "$.contexts.left", tol)
    rreg, rcat = _catalog(sc.rays["right"], sc.contexts["right"], sc.dims[1], "$.contexts.right", tol)
    lposet = generate_poset(lcat, lreg, tol)
    rposet = generate_poset(rcat, rreg, tol)
    pp = product_poset(lposet, rposet)
    lnodes = [lposet.node_id(c) for c in lcat]
    rnodes = [rposet.node_id(c) for c in rcat]
    pairs = sc.product_contexts
    if pairs is None:
        pairs = tuple((i, j) for i in range(len(lcat)) for j in range(len(rcat)))
    analysis = [ProductNode(lnodes[i], rnodes[j]) for i, j in pairs]

    section = None
    if sc.tables is not None:
        tables = {}
        for li, ri, probs in sc.tables:
            node = ProductNode(lnodes[li], rnodes[ri])
            want = pp.table_shape(node)
            if probs.shape != want:
                raise ScenarioError(
                    "$.tables",
                    f"table for context pair ({li}, {ri}) has shape {probs.shape}, "
                    f"expected {want}",
                )
            tables[node] = CorrelationTable(node, probs)
        section = BellSection(pp, tables, frozenset(tables))
    elif sc.state is not None:
        from .bell import section_from_bipartite_state

        section = section_from_bipartite_state(pp, sc.state, tol=1e-7)
    return BipartiteModel(pp, section, analysis, lnodes, rnodes)
