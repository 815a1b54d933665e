"""Bundled scenario documents.

Verdicts are never stored here; every bundled catalog is re-validated on
ingest (orthogonality, incidence) and its verdict recomputed by the tools.
"""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path

# omega = exp(2 pi i / 3) and its powers, in exact form
_OMEGA = [1, ["-1/2", "sqrt(3)/2"], ["-1/2", "-sqrt(3)/2"]]


def _mub_c3_rays() -> list[list]:
    rays: list[list] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    for r in range(3):
        for k in range(3):
            rays.append([1, _OMEGA[(r + k) % 3], _OMEGA[(r + 2 * k) % 3]])
    return rays


# 18 rays in dimension 4, entries in {0, 1, -1}; nine orthogonal bases,
# each ray a member of exactly two. Standard coordinates from the
# eighteen-vector construction in the literature.
_KS18_RAYS = [
    [0, 0, 0, 1],
    [0, 0, 1, 0],
    [1, 1, 0, 0],
    [1, -1, 0, 0],
    [0, 1, 0, 0],
    [1, 0, 1, 0],
    [1, 0, -1, 0],
    [1, -1, 1, -1],
    [1, -1, -1, 1],
    [0, 0, 1, 1],
    [1, 1, 1, 1],
    [0, 1, 0, -1],
    [1, 0, 0, 1],
    [1, 0, 0, -1],
    [0, 1, -1, 0],
    [1, 1, -1, 1],
    [1, 1, 1, -1],
    [-1, 1, 1, 1],
]

_KS18_BASES = [
    [0, 1, 2, 3],
    [0, 4, 5, 6],
    [7, 8, 2, 9],
    [7, 10, 6, 11],
    [1, 4, 12, 13],
    [8, 10, 13, 14],
    [15, 16, 3, 9],
    [15, 17, 5, 11],
    [16, 17, 12, 14],
]


def _chsh_scenario() -> dict:
    c = math.cos(math.pi / 8)
    s = math.sin(math.pi / 8)
    return {
        "kind": "bipartite",
        "dims": [2, 2],
        "rays": {
            "left": [[1, 0], [0, 1], [1, 1], [-1, 1]],
            "right": [[c, s], [-s, c], [c, -s], [s, c]],
        },
        "contexts": {"left": [[0, 1], [2, 3]], "right": [[0, 1], [2, 3]]},
        "product_contexts": [[0, 0], [0, 1], [1, 0], [1, 1]],
        "state": [
            ["1/2", 0, 0, "1/2"],
            [0, 0, 0, 0],
            [0, 0, 0, 0],
            ["1/2", 0, 0, "1/2"],
        ],
        "metadata": {
            "name": "chsh-c2",
            "note": "two measurement angles per side at the optimal separation; "
            "maximally entangled state",
        },
    }


_BUNDLED: dict[str, dict] = {
    "demo-c3": {
        "kind": "single",
        "dim": 3,
        "rays": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
        "contexts": [[0, 1, 2]],
        "metadata": {"name": "demo-c3", "note": "one orthonormal basis; colorable"},
    },
    "ks18-c4": {
        "kind": "single",
        "dim": 4,
        "rays": _KS18_RAYS,
        "contexts": _KS18_BASES,
        "metadata": {
            "name": "ks18-c4",
            "note": "18 rays, 9 bases, each ray in exactly two bases; "
            "verdict recomputed by exhaustive search on every run",
        },
    },
    "mub-c3": {
        "kind": "single",
        "dim": 3,
        "rays": _mub_c3_rays(),
        "contexts": [[0, 1, 2], [3, 4, 5], [6, 7, 8], [9, 10, 11]],
        "metadata": {
            "name": "mub-c3",
            "note": "four mutually unbiased bases; informationally complete",
        },
    },
    "chsh-c2": _chsh_scenario(),
}


def bundled_names() -> list[str]:
    return sorted(_BUNDLED)


def bundled_scenario(name: str) -> dict:
    if name not in _BUNDLED:
        raise KeyError(f"unknown bundled scenario {name!r}; have {bundled_names()}")
    return copy.deepcopy(_BUNDLED[name])


def bundled_text(name: str) -> str:
    return json.dumps(bundled_scenario(name), indent=2, sort_keys=True) + "\n"


def write_bundled(directory) -> list[Path]:
    """Dump every bundled scenario as a JSON file; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in bundled_names():
        path = directory / f"{name}.json"
        path.write_text(bundled_text(name), encoding="utf-8")
        paths.append(path)
    return paths
