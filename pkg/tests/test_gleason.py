"""Probabilistic presheaf: Born sections, reconstruction, Naimark dilation."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

import contextua as cx
from contextua.gleason import (
    ContextMeasure,
    Dilation,
    context_measure,
    hermitian_basis,
    marginalise,
    measure_value,
    probabilistic_shape,
    quasilinearity_report,
    recovered_weights,
)
from contextua.opalg import ProjectionRegistry, max_norm

from conftest import random_basis_context, random_density, random_hermitian


def independent_span_rank(mats, dim):
    """Oracle: rank of the real span of Hermitians via an svd over vectorised parts."""
    rows = []
    for m in mats:
        rows.append(np.concatenate([np.asarray(m).real.reshape(-1), np.asarray(m).imag.reshape(-1)]))
    a = np.stack(rows)
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > 1e-8 * s[0]))


@pytest.fixture(scope="module")
def ic_poset_c4():
    """Six random bases in dimension 4: informationally complete."""
    rng = np.random.default_rng(77)
    reg = ProjectionRegistry(4)
    catalog = [random_basis_context(rng, reg) for _ in range(6)]
    return cx.generate_poset(catalog, reg)


class TestSectionFromState:
    def test_maximally_mixed_weights(self, basis_poset_c3):
        poset = basis_poset_c3
        rho = cx.density_matrix(np.eye(3) / 3)
        s = cx.section_from_state(poset, rho)
        for node in range(len(poset)):
            for idx, p in enumerate(poset.atoms_of(node)):
                assert s.assignment[node].weights[idx] == pytest.approx(p.rank / 3)

    def test_pure_state_on_its_context(self, basis_poset_c3):
        poset = basis_poset_c3
        rho = cx.density_matrix(np.diag([1.0, 0.0, 0.0]))
        s = cx.section_from_state(poset, rho)
        e1_key = cx.opalg.canonical_key(np.diag([1.0, 0, 0]).astype(complex))
        node = next(
            i
            for i in range(len(poset))
            if len(poset.nodes[i].atoms) == 2 and e1_key in poset.atom_keys(i)
        )
        idx = poset.atom_keys(node).index(e1_key)
        w = s.assignment[node].weights
        assert w[idx] == pytest.approx(1.0)
        assert w[1 - idx] == pytest.approx(0.0, abs=1e-12)

    def test_additivity_on_orthogonal_atoms(self, mub_poset_c3):
        # mu(p + q) = mu(p) + mu(q), checked by direct summation
        poset = mub_poset_c3
        rng = np.random.default_rng(1)
        rho = random_density(rng, 3)
        s = cx.section_from_state(poset, rho)
        for node in range(len(poset)):
            atoms = poset.atoms_of(node)
            m = s.assignment[node]
            for i, j in itertools.combinations(range(len(atoms)), 2):
                p, q = atoms[i], atoms[j]
                lhs = float(np.real(np.trace(rho.matrix @ (p.matrix + q.matrix))))
                assert lhs == pytest.approx(
                    float(m.weights[i]) + float(m.weights[j]), abs=1e-9
                )

    def test_dim_mismatch(self, basis_poset_c3):
        with pytest.raises(ValueError, match="dim"):
            cx.section_from_state(basis_poset_c3, cx.density_matrix(np.eye(4) / 4))

    def test_always_valid_prob_section(self):
        rng = np.random.default_rng(1234)
        trials = 0
        for dim in (3, 4, 5, 6):
            reg = ProjectionRegistry(dim)
            catalog = [random_basis_context(rng, reg) for _ in range(2)]
            poset = cx.generate_poset(catalog, reg)
            for _ in range(26):
                rho = random_density(rng, dim)
                s = cx.section_from_state(poset, rho)
                assert cx.verify_prob_section(poset, s)
                trials += 1
        assert trials >= 100


class TestStateFromSection:
    def test_roundtrip_dims_3_and_4(self, mub_poset_c3, ic_poset_c4):
        rng = np.random.default_rng(5)
        for poset in (mub_poset_c3, ic_poset_c4):
            assert cx.is_informationally_complete(poset)
            for _ in range(20):
                rho = random_density(rng, poset.dim)
                result = cx.state_from_section(poset, cx.section_from_state(poset, rho))
                assert result.status == "unique"
                assert max_norm(result.state.matrix - rho.matrix) <= 1e-8

    def test_single_context_underdetermined(self, basis_poset_c3):
        poset = basis_poset_c3
        rng = np.random.default_rng(3)
        rho = random_density(rng, 3)
        result = cx.state_from_section(poset, cx.section_from_state(poset, rho))
        assert result.status == "underdetermined"
        # independent rank oracle: projections here span only the diagonals
        mats = [p.matrix for _, p in poset.registry.items()] + [np.eye(3)]
        rank = independent_span_rank(mats, 3)
        assert rank == 3
        assert result.solution_space_dim == 9 - rank == 6

    def test_entangled_partial_transpose_infeasible(self):
        # product bases of three qubit MUBs per factor span dim-4 Hermitians;
        # the partially transposed entangled state has a negative eigenvalue
        reg = ProjectionRegistry(4)
        paulis = {
            "z": [np.array([1, 0]), np.array([0, 1])],
            "x": [np.array([1, 1]) / np.sqrt(2), np.array([1, -1]) / np.sqrt(2)],
            "y": [np.array([1, 1j]) / np.sqrt(2), np.array([1, -1j]) / np.sqrt(2)],
        }
        catalog = []
        for left in paulis.values():
            for right in paulis.values():
                atoms = [
                    np.kron(np.outer(u, u.conj()), np.outer(v, v.conj()))
                    for u in left
                    for v in right
                ]
                catalog.append(cx.context_from_projections(reg, atoms))
        poset = cx.generate_poset(catalog, reg)
        assert cx.is_informationally_complete(poset)
        phi = np.zeros(4, dtype=complex)
        phi[0] = phi[3] = 1 / np.sqrt(2)
        w = cx.partial_transpose(np.outer(phi, phi.conj()), (2, 2))
        # eigendecomposition oracle: min eigenvalue is -1/2
        assert np.linalg.eigvalsh(w).min() == pytest.approx(-0.5)
        assignment = {}
        for i in range(len(poset)):
            weights = [
                float(np.real(np.trace(w @ p.matrix))) for p in poset.atoms_of(i)
            ]
            assignment[i] = context_measure(poset, i, weights, tol=1e-7)
        s = cx.ProbSection(assignment, frozenset(range(len(poset))))
        assert cx.verify_prob_section(poset, s)
        result = cx.state_from_section(poset, s)
        assert result.status == "infeasible"
        assert result.reason == "unique solution has a negative eigenvalue"
        assert result.eigenvalues.min() == pytest.approx(-0.5, abs=1e-7)

    def test_inconsistent_section_infeasible(self, mub_poset_c3):
        poset = mub_poset_c3
        rng = np.random.default_rng(8)
        rho = random_density(rng, 3)
        s = cx.section_from_state(poset, rho)
        assignment = dict(s.assignment)
        # corrupt one maximal context's weights: no state matches all contexts
        node = poset.maximal_nodes()[0]
        assignment[node] = context_measure(poset, node, [0.7, 0.2, 0.1], tol=1e-7)
        bad = cx.ProbSection(assignment, s.domain)
        result = cx.state_from_section(poset, bad)
        assert result.status == "infeasible"
        assert result.residual > 1e-6


class TestInformationalCompleteness:
    def test_single_maximal_false(self, basis_poset_c3):
        assert not cx.is_informationally_complete(basis_poset_c3)

    def test_mub_true_with_rank_oracle(self, mub_poset_c3):
        assert cx.is_informationally_complete(mub_poset_c3)
        mats = [p.matrix for _, p in mub_poset_c3.registry.items()] + [np.eye(3)]
        assert independent_span_rank(mats, 3) == 9

    def test_trivial_false(self):
        reg = ProjectionRegistry(3)
        assert not cx.is_informationally_complete(cx.generate_poset([], reg))


class TestMarginalisation:
    def test_restriction_composes(self, shared_ray_poset_c3, mub_poset_c3):
        rng = np.random.default_rng(6)
        for poset in (shared_ray_poset_c3, mub_poset_c3):
            shape = probabilistic_shape(poset)

            def samples(k, p=poset):
                out = []
                for _ in range(3):
                    w = rng.dirichlet(np.ones(len(p.nodes[k].atoms)))
                    out.append(context_measure(p, k, w))
                return out

            assert shape.check_functoriality(samples) > 0

    def test_additivity_closure(self, mub_poset_c3):
        # mu(p v q) = mu(p) + mu(q) for orthogonal projections in one context
        poset = mub_poset_c3
        rng = np.random.default_rng(10)
        rho = random_density(rng, 3)
        s = cx.section_from_state(poset, rho)
        for node in range(len(poset)):
            atoms = poset.atoms_of(node)
            m = s.assignment[node]
            for i, j in itertools.combinations(range(len(atoms)), 2):
                joined = cx.join(atoms[i], atoms[j])
                lhs = measure_value(poset, m, joined.matrix)
                assert lhs == pytest.approx(
                    float(m.weights[i] + m.weights[j]), abs=1e-8
                )


class TestNaimark:
    def test_point_mass(self, basis_poset_c3):
        m = context_measure(basis_poset_c3, basis_poset_c3.maximal_nodes()[0], [1, 0, 0])
        d = cx.naimark_dilate(m)
        assert d.ancilla_dim == 3
        assert np.allclose(d.vector, [1, 0, 0])
        assert np.allclose(recovered_weights(d), m.weights)

    def test_uniform_exact(self, basis_poset_c3):
        m = context_measure(
            basis_poset_c3, basis_poset_c3.maximal_nodes()[0], [1 / 3, 1 / 3, 1 / 3]
        )
        d = cx.naimark_dilate(m)
        assert np.allclose(d.vector, np.ones(3) / np.sqrt(3))
        assert np.array_equal(recovered_weights(d), np.asarray(m.weights))

    def test_phase_freedom(self, basis_poset_c3):
        m = context_measure(basis_poset_c3, basis_poset_c3.maximal_nodes()[0], [0.5, 0.3, 0.2])
        d = cx.naimark_dilate(m)
        phased = Dilation(d.context, d.ancilla_dim, d.embedding, np.exp(0.9j) * d.vector)
        assert np.allclose(recovered_weights(phased), recovered_weights(d))

    def test_embedding_is_resolution(self, basis_poset_c3):
        m = context_measure(basis_poset_c3, basis_poset_c3.maximal_nodes()[0], [0.2, 0.2, 0.6])
        d = cx.naimark_dilate(m)
        total = sum(p.matrix for p in d.embedding)
        assert np.array_equal(total, np.eye(3))

    def test_dilation_soundness_random(self, mub_poset_c3):
        rng = np.random.default_rng(12)
        for node in range(len(mub_poset_c3)):
            w = rng.dirichlet(np.ones(len(mub_poset_c3.nodes[node].atoms)))
            m = context_measure(mub_poset_c3, node, w)
            assert np.allclose(
                recovered_weights(cx.naimark_dilate(m)), np.asarray(m.weights), atol=1e-15
            )


class TestQuasilinearity:
    def test_state_section_linear(self, mub_poset_c3):
        rng = np.random.default_rng(4)
        rho = random_density(rng, 3)
        s = cx.section_from_state(mub_poset_c3, rho)
        report = quasilinearity_report(mub_poset_c3, s, seed=1)
        assert report.linearity_testable
        assert report.within_context_residual <= 1e-8
        assert report.cross_context_residual <= 1e-8

    def test_underdetermined_flagged(self, basis_poset_c3):
        rng = np.random.default_rng(4)
        rho = random_density(rng, 3)
        s = cx.section_from_state(basis_poset_c3, rho)
        report = quasilinearity_report(basis_poset_c3, s, seed=1)
        assert not report.linearity_testable
        assert report.notes == "linearity untestable"
        assert report.within_context_residual <= 1e-8


class TestExtremePoints:
    def test_characters_embed_as_measures(self, basis_poset_c3):
        poset = basis_poset_c3
        node = poset.maximal_nodes()[0]
        for ch in cx.spectral.characters_of(poset, node):
            w = np.zeros(3)
            w[ch.chosen_atom] = 1.0
            m = context_measure(poset, node, w)  # validates the constraints
            assert float(np.asarray(m.weights).sum()) == 1.0

    def test_zero_one_measures_extreme_by_lp(self, basis_poset_c3):
        # LP oracle: mu1, mu2 in the simplex with (mu1 + mu2)/2 = e_i forces
        # mu1 = mu2 = e_i, so 0/1 measures are not proper mixtures
        k = 3
        for i in range(k):
            target = np.zeros(k)
            target[i] = 1.0
            # variables mu1, mu2; maximize separation against a fixed functional
            c = np.concatenate([np.eye(k)[(i + 1) % k], -np.eye(k)[(i + 1) % k]])
            a_eq = np.block(
                [
                    [np.eye(k), np.eye(k)],
                    [np.ones((1, k)), np.zeros((1, k))],
                ]
            )
            b_eq = np.concatenate([2 * target, [1.0]])
            res = linprog(
                -c, A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * (2 * k), method="highs"
            )
            assert res.success
            assert abs(res.fun) < 1e-9
            assert np.allclose(res.x[:k], target, atol=1e-9)


class TestContextMeasureValidation:
    def test_clamps_tiny_negative(self, basis_poset_c3):
        m = context_measure(
            basis_poset_c3, basis_poset_c3.maximal_nodes()[0], [1.0 + 5e-10, -5e-10, 0.0]
        )
        assert float(np.asarray(m.weights).min()) == 0.0

    def test_rejects_large_negative(self, basis_poset_c3):
        with pytest.raises(ValueError, match="negative"):
            context_measure(basis_poset_c3, basis_poset_c3.maximal_nodes()[0], [1.2, -0.2, 0.0])

    def test_rejects_bad_total(self, basis_poset_c3):
        with pytest.raises(ValueError, match="sum to 1"):
            context_measure(basis_poset_c3, basis_poset_c3.maximal_nodes()[0], [0.5, 0.2, 0.2])
