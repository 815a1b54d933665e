"""Shared fixtures: standard posets, random-object helpers."""

from __future__ import annotations

import numpy as np
import pytest

import contextua as cx
from contextua.catalogs import bundled_text


def random_unitary(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q @ np.diag(np.exp(1j * rng.uniform(0, 2 * np.pi, dim)))


def random_hermitian(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (g + g.conj().T)


def random_density(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    return cx.density_matrix(m / np.trace(m).real, tol=1e-7)


def random_basis_context(rng, registry):
    u = random_unitary(rng, registry.dim)
    atoms = [cx.projection(np.outer(u[:, k], u[:, k].conj())) for k in range(registry.dim)]
    return cx.context_from_projections(registry, atoms)


@pytest.fixture(scope="session")
def basis_poset_c3():
    """Single diagonal basis in dimension 3: the 5-node partition poset."""
    reg = cx.ProjectionRegistry(3)
    ctx = cx.context_from_observables(reg, [np.diag([1.0, 2.0, 3.0])])
    return cx.generate_poset([ctx], reg)


@pytest.fixture(scope="session")
def shared_ray_poset_c3():
    """Two maximal contexts sharing one rank-1 projection."""
    reg = cx.ProjectionRegistry(3)
    e = np.eye(3)
    first = cx.context_from_projections(
        reg, [np.outer(e[:, k], e[:, k]) for k in range(3)]
    )
    c, s = np.cos(0.7), np.sin(0.7)
    v2 = np.array([0, c, s])
    v3 = np.array([0, -s, c])
    second = cx.context_from_projections(
        reg,
        [np.outer(e[:, 0], e[:, 0]), np.outer(v2, v2), np.outer(v3, v3)],
    )
    return cx.generate_poset([first, second], reg)


@pytest.fixture(scope="session")
def mub_poset_c3():
    sc = cx.parse_scenario(bundled_text("mub-c3"))
    return cx.build_single_poset(sc)


@pytest.fixture(scope="session")
def ks18_poset():
    sc = cx.parse_scenario(bundled_text("ks18-c4"))
    return cx.build_single_poset(sc)


@pytest.fixture(scope="session")
def chsh_model():
    sc = cx.parse_scenario(bundled_text("chsh-c2"))
    return cx.build_bipartite_model(sc)


@pytest.fixture(scope="session")
def mub2_bipartite_doc():
    """Three mutually unbiased qubit bases per side: locally spanning."""
    rays = [[1, 0], [0, 1], [1, 1], [1, -1], [1, [0, 1]], [1, [0, -1]]]
    return {
        "kind": "bipartite",
        "dims": [2, 2],
        "rays": {"left": rays, "right": rays},
        "contexts": {
            "left": [[0, 1], [2, 3], [4, 5]],
            "right": [[0, 1], [2, 3], [4, 5]],
        },
    }
