"""Scenario ingestion, golden exit codes, report determinism."""

from __future__ import annotations

import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import contextua as cx
from contextua.catalogs import bundled_names, bundled_scenario, bundled_text, write_bundled
from contextua.cli import main, run
from contextua.scenario import ScenarioError, emit_scenario, parse_entry, parse_real


class TestEntryParsing:
    @pytest.mark.parametrize(
        "token,expected",
        [
            (0.25, 0.25),
            ("1/2", 0.5),
            ("-3/4", -0.75),
            ("sqrt(2)", np.sqrt(2)),
            ("sqrt(3)/2", np.sqrt(3) / 2),
            ("-sqrt(2)/2", -np.sqrt(2) / 2),
            ("0.125", 0.125),
            ("-2", -2.0),
        ],
    )
    def test_real_forms(self, token, expected):
        assert parse_real(token, "$") == pytest.approx(expected, abs=1e-15)

    def test_rejects_garbage(self):
        with pytest.raises(ScenarioError, match=r"\$\.x"):
            parse_real("two thirds", "$.x")

    def test_rejects_zero_denominator(self):
        with pytest.raises(ScenarioError, match="division"):
            parse_real("1/0", "$")

    @given(st.integers(-10**6, 10**6), st.integers(1, 10**6))
    def test_fraction_strings_exact(self, num, den):
        assert parse_real(f"{num}/{den}", "$") == num / den

    @given(st.integers(0, 10**6), st.integers(1, 1000), st.booleans())
    def test_sqrt_strings(self, c, d, neg):
        sign = "-" if neg else ""
        got = parse_real(f"{sign}sqrt({c})/{d}", "$")
        assert got == pytest.approx((-1 if neg else 1) * np.sqrt(c) / d, rel=1e-15)

    @settings(max_examples=50)
    @given(
        st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False),
        st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False),
    )
    def test_pair_entries(self, re, im):
        assert parse_entry([re, im], "$") == complex(re, im)


class TestParseScenario:
    def test_minimal_single_basis(self):
        sc = cx.parse_scenario(bundled_text("demo-c3"))
        assert sc.kind == "single"
        assert len(sc.contexts["main"]) == 1
        assert len(sc.rays["main"]) == 3

    def test_ks18_incidence_counts(self):
        sc = cx.parse_scenario(bundled_text("ks18-c4"))
        assert len(sc.contexts["main"]) == 9
        counts = Counter(i for ctx in sc.contexts["main"] for i in ctx)
        assert len(sc.rays["main"]) == 18
        assert all(counts[i] == 2 for i in range(18))

    def test_malformed_vector_length_path(self):
        doc = {"kind": "single", "dim": 3, "rays": [[1, 0, 0], [0, 1]], "contexts": [[0]]}
        with pytest.raises(ScenarioError, match=r"\$\.rays\[1\]"):
            cx.parse_scenario(json.dumps(doc))

    def test_non_orthogonal_context_names_rays(self):
        doc = {
            "kind": "single",
            "dim": 2,
            "rays": [[1, 0], [1, 1]],
            "contexts": [[0, 1]],
        }
        with pytest.raises(ScenarioError, match="rays 0 and 1 are not orthogonal"):
            cx.parse_scenario(json.dumps(doc))

    def test_near_duplicate_below_grid(self):
        doc = {
            "kind": "single",
            "dim": 2,
            "rays": [[1, 0], [1, 1e-7]],
            "contexts": [[0]],
        }
        with pytest.raises(ScenarioError, match="near-duplicate"):
            cx.parse_scenario(json.dumps(doc))

    def test_unknown_kind(self):
        with pytest.raises(ScenarioError, match=r"\$\.kind"):
            cx.parse_scenario(json.dumps({"kind": "tripartite"}))

    def test_invalid_json(self):
        with pytest.raises(ScenarioError, match="invalid JSON"):
            cx.parse_scenario("{nope")

    def test_context_padding_with_complement(self):
        doc = {"kind": "single", "dim": 3, "rays": [[1, 0, 0]], "contexts": [[0]]}
        poset = cx.build_single_poset(cx.parse_scenario(json.dumps(doc)))
        maximal = poset.maximal_nodes()
        ranks = sorted(p.rank for p in poset.atoms_of(maximal[0]))
        assert ranks == [1, 2]

    def test_round_trip_structural_equality(self):
        for name in bundled_names():
            sc = cx.parse_scenario(bundled_text(name))
            again = cx.parse_scenario(emit_scenario(sc))
            assert again.kind == sc.kind
            assert again.dims == sc.dims
            assert again.digest() == sc.digest()
            for side in sc.rays:
                for u, v in zip(sc.rays[side], again.rays[side]):
                    assert np.allclose(u, v)

    def test_bipartite_table_override(self):
        doc = bundled_scenario("chsh-c2")
        del doc["state"]
        doc["tables"] = [
            {"left": 0, "right": 0, "probs": [[0.5, 0.0], [0.0, 0.5]]}
        ]
        model = cx.build_bipartite_model(cx.parse_scenario(json.dumps(doc)))
        assert model.section is not None
        assert len(model.section.domain) == 1


GOLDEN_EXIT_CODES = [
    ("ks-check", "demo-c3", 0, "colorable"),
    ("ks-check", "ks18-c4", 2, "non_colorable"),
    ("ks-enumerate", "demo-c3", 0, "colorable"),
    ("ks-enumerate", "ks18-c4", 2, "non_colorable"),
    ("gleason-roundtrip", "mub-c3", 0, "roundtrip_ok"),
    ("gleason-roundtrip", "demo-c3", 2, "underdetermined"),
    ("bell-analyze", "chsh-c2", 2, "not_factorisable"),
    ("bell-classify", "chsh-c2", 0, "underdetermined"),
    ("wigner-check", "mub-c3", 0, "wigner_ok"),
    ("poset-export", "demo-c3", 0, "exported"),
]


class TestRun:
    @pytest.mark.parametrize("command,name,code,verdict", GOLDEN_EXIT_CODES)
    def test_exit_code_contract(self, command, name, code, verdict):
        sc = cx.parse_scenario(bundled_text(name))
        report = run(command, sc)
        assert report.verdict == verdict
        assert report.exit_code == code

    def test_bell_classify_chsh_rank_deficit(self):
        # two bases per qubit span 3 of 4 local dimensions: 16 - 9 unknowns free
        sc = cx.parse_scenario(bundled_text("chsh-c2"))
        report = run("bell-classify", sc)
        assert report.verdict == "underdetermined"
        assert report.payload["solution_space_dim"] == 7

    def test_bell_classify_quantum_with_spanning_catalog(self, mub2_bipartite_doc):
        doc = dict(mub2_bipartite_doc)
        doc["state"] = [
            ["1/2", 0, 0, "1/2"],
            [0, 0, 0, 0],
            [0, 0, 0, 0],
            ["1/2", 0, 0, "1/2"],
        ]
        report = run("bell-classify", cx.parse_scenario(json.dumps(doc)))
        assert report.verdict == "quantum"
        assert report.exit_code == 0

    def test_determinism_modulo_timings(self):
        sc = cx.parse_scenario(bundled_text("ks18-c4"))
        a = run("ks-check", sc).as_dict()
        b = run("ks-check", sc).as_dict()
        a.pop("timings")
        b.pop("timings")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_seeded_commands_deterministic(self):
        sc = cx.parse_scenario(bundled_text("mub-c3"))
        a = run("gleason-roundtrip", sc, seed=5).as_dict()
        b = run("gleason-roundtrip", sc, seed=5).as_dict()
        a.pop("timings")
        b.pop("timings")
        assert a == b

    def test_unknown_command(self):
        sc = cx.parse_scenario(bundled_text("demo-c3"))
        with pytest.raises(ValueError, match="unknown command"):
            run("ks-colorize", sc)

    def test_gleason_reconstruct_from_section(self):
        doc = bundled_scenario("mub-c3")
        rho = np.eye(3) / 3
        weights = []
        sc0 = cx.parse_scenario(json.dumps(doc))
        model = cx.build_single_poset(sc0)
        for k, ctx in enumerate(sc0.contexts["main"]):
            weights.append({"context": k, "weights": [1 / 3, 1 / 3, 1 / 3]})
        doc["section"] = weights
        report = run("gleason-reconstruct", cx.parse_scenario(json.dumps(doc)))
        assert report.verdict == "unique"
        got = np.array([[complex(re, im) for re, im in row] for row in report.payload["state"]])
        assert np.allclose(got, rho, atol=1e-8)

    def test_gleason_reconstruct_infeasible_exit(self):
        doc = bundled_scenario("mub-c3")
        rng = np.random.default_rng(3)
        # random inconsistent weights across the four bases
        doc["section"] = [
            {"context": k, "weights": list(rng.dirichlet(np.ones(3)))} for k in range(4)
        ]
        sc = cx.parse_scenario(json.dumps(doc))
        report = run("gleason-reconstruct", sc)
        assert report.verdict == "infeasible"
        assert report.exit_code == 2


class TestMain:
    def test_json_output_and_out_file(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = main(
            ["ks-check", "--scenario", "builtin:demo-c3", "--out", str(out)]
        )
        assert code == 0
        captured = capsys.readouterr().out
        assert json.loads(captured)["verdict"] == "colorable"
        assert json.loads(out.read_text())["verdict"] == "colorable"

    def test_scenario_file_loading(self, tmp_path, capsys):
        paths = write_bundled(tmp_path)
        target = next(p for p in paths if p.name == "ks18-c4.json")
        code = main(["ks-check", "--scenario", str(target)])
        assert code == 2
        assert json.loads(capsys.readouterr().out)["verdict"] == "non_colorable"

    def test_text_format_no_color(self, capsys, monkeypatch):
        monkeypatch.setenv("CONTEXTUA_NO_COLOR", "1")
        code = main(["ks-check", "--scenario", "builtin:demo-c3", "--format", "text"])
        out = capsys.readouterr().out
        assert code == 0
        assert "verdict: colorable" in out
        assert "\x1b[" not in out

    def test_dot_format(self, capsys):
        code = main(["poset-export", "--scenario", "builtin:demo-c3", "--format", "dot"])
        assert code == 0
        assert capsys.readouterr().out.startswith("digraph contexts {")

    def test_dot_format_rejected_elsewhere(self, capsys):
        code = main(["ks-check", "--scenario", "builtin:demo-c3", "--format", "dot"])
        assert code == 1

    def test_unknown_command_usage(self, capsys):
        assert main(["ks-colorize", "--scenario", "builtin:demo-c3"]) == 1

    def test_missing_file_error(self, capsys):
        assert main(["ks-check", "--scenario", "/nonexistent.json"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_parse_error_exit_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"kind": "single", "dim": 2, "rays": [[1,0],[1,1]], "contexts": [[0,1]]}')
        assert main(["ks-check", "--scenario", str(bad)]) == 1
        assert "not orthogonal" in capsys.readouterr().err
