import json
import math
from pathlib import Path

import numpy as np
import pytest

from nvcool import cli
from nvcool import meanfield as mf
from nvcool import model as md
from nvcool.config import load_config, parse_config
from nvcool.errors import ConfigError
from nvcool.hilbert import SpaceLayout
from nvcool.reduced import ReducedParams
from nvcool.tables import read_table

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
TWO_PI = 2 * math.pi


def load_doc(name):
    return json.loads((CONFIGS / name).read_text())


def write(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def run(tmp_path, command, doc, *extra):
    cfg = write(tmp_path, doc)
    out = tmp_path / "out.csv"
    code = cli.main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, (read_table(out) if out.exists() else None)


def tiny_evolve(mode="evolve-full", **params):
    base = {"omega_z": 10.0, "g_a": 0.5, "g_b": 0.2, "g_ab": 0.4, "gamma_a": 1.0, "gamma_b": 1.0,
            "Gamma": 5.0, "nbar_a": 1.0, "nbar_b": 0.5}
    base.update(params)
    return {"mode": mode, "renormalized": True, "params": base, "truncation": {"dim_a": 5, "dim_b": 4},
            "integrator": {"dt": 2e-3, "t_final": 0.4, "record_stride": 20}}


class TestLoadConfig:
    def test_fig2a(self):
        spec = load_config(CONFIGS / "fig2a.json")
        assert spec.mode == "analytic-sweep"
        assert spec.params.gamma_b == pytest.approx(TWO_PI)
        assert spec.params.delta == spec.params.omega_z
        assert len(md.build_collapse_terms(spec.params, SpaceLayout.full(2, 2))) == 5
        assert spec.warnings == []
        assert spec.sweep[0][0] == "nbar_a" and spec.sweep[0][1][:3] == [0.0, 40.0, 80.0]

    def test_missing_frequency(self):
        doc = load_doc("fig2a.json")
        del doc["params"]["omega_z_over_2pi"]
        with pytest.raises(ConfigError, match="omega_z_over_2pi"):
            parse_config(doc)

    def test_mixed_unit_styles(self):
        doc = load_doc("fig2a.json")
        doc["params"]["Gamma"] = 30.0
        with pytest.raises(ConfigError, match=r"params\.Gamma.*mixes"):
            parse_config(doc)

    def test_unknown_top_level_key(self):
        doc = load_doc("fig2a.json")
        doc["colour"] = "red"
        with pytest.raises(ConfigError, match="colour"):
            parse_config(doc)

    def test_bad_value(self):
        doc = load_doc("fig2a.json")
        doc["params"]["nbar_b"] = "seven"
        with pytest.raises(ConfigError, match="params.nbar_b"):
            parse_config(doc)

    def test_negative_rate(self):
        doc = load_doc("fig2a.json")
        doc["params"]["gamma_b_over_2pi"] = -1
        with pytest.raises(ConfigError, match="gamma_b"):
            parse_config(doc)

    def test_unknown_sweep_parameter(self):
        doc = load_doc("fig2a.json")
        doc["sweep"] = {"temperature": [1.0]}
        with pytest.raises(ConfigError, match="sweep.temperature"):
            parse_config(doc)

    def test_truncation_warning(self):
        doc = tiny_evolve(nbar_a=160.0)
        doc["truncation"] = {"dim_a": 10, "dim_b": 10}
        spec = parse_config(doc)
        assert any("dim_a=10" in w for w in spec.warnings)

    def test_defaults(self):
        doc = tiny_evolve()
        del doc["integrator"], doc["truncation"]
        spec = parse_config(doc)
        assert spec.integrator.dt == pytest.approx(2e-4) and spec.integrator.t_final == pytest.approx(3.0)
        assert spec.stationarity == (pytest.approx(0.3), 1e-3)
        assert spec.dims_for(4.0, 1.0) == (60, 15)
        assert spec.dims_for(1.0, 1.0) == (15, 15)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{ not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(path)

    def test_shipped_configs_parse(self):
        for path in sorted(CONFIGS.glob("*.json")):
            assert load_config(path).mode


class TestAnalyticSweep:
    def test_fig2a_crossing(self, tmp_path):
        code, table = run(tmp_path, "analytic-sweep", load_doc("fig2a.json"))
        assert code == 0
        assert 150 <= table.footer["crossing_nb_eq_1"] <= 165
        assert table.column("nbar_a") == [float(x) for x in range(0, 401, 40)]
        assert table.columns == ["nbar_a", "nb_stationary", "ns_stationary", "A", "B", "C"]

    def test_row_order_preserved(self, tmp_path):
        doc = load_doc("fig2a.json")
        doc["sweep"] = {"nbar_a": [400, 0, 160, 40]}
        _, table = run(tmp_path, "analytic-sweep", doc)
        assert table.column("nbar_a") == [400.0, 0.0, 160.0, 40.0]

    def test_no_heating_row(self, tmp_path):
        _, table = run(tmp_path, "analytic-sweep", load_doc("fig2a.json"))
        row = dict(zip(table.columns, table.rows[0]))
        # independent oracle: at nbar_a = 0 the spin is a zero-temperature bath, n_s' = 0
        r, gb, G, nb = 3.0 / 32.0, 1.0, 30.0, 7.0
        roots = np.roots([-gb * r, r * (nb * gb - G) - gb * G, gb * nb * G])
        oracle = max(roots.real)
        assert row["nb_stationary"] == pytest.approx(oracle, rel=1e-9)
        assert row["nb_stationary"] < nb

    @pytest.mark.parametrize("name, lo, hi", [("fig2b_gamma300.json", 20000, 24000),
                                              ("fig2b_gamma500.json", 19000, 20500)])
    def test_fig2b(self, tmp_path, name, lo, hi):
        _, table = run(tmp_path, "analytic-sweep", load_doc(name))
        assert lo <= table.footer["crossing_nb_eq_1"] <= hi

    def test_header_embeds_parameters(self, tmp_path):
        _, table = run(tmp_path, "analytic-sweep", load_doc("fig2a.json"))
        assert table.header["mode"] == "analytic-sweep"
        assert table.header["resolved"]["params"]["Gamma"] == pytest.approx(TWO_PI * 30)
        text = (tmp_path / "out.csv").read_text()
        assert text.startswith("# nvcool ")


class TestGammaSweep:
    def test_rows_and_summary(self, tmp_path):
        code, table = run(tmp_path, "gamma-sweep", load_doc("fig3_nbar_a300.json"))
        assert code == 0
        assert table.columns == ["Gamma_over_2pi", "nb_stationary", "nb_asymptotic"]
        assert len(table.rows) == 41
        best = table.footer["optimal_Gamma_over_2pi"]
        assert min(table.column("nb_stationary")) >= table.footer["optimal_nb"] - 1e-12
        assert 10 < best < 1000

    def test_single_point(self, tmp_path):
        doc = load_doc("fig3_nbar_a300.json")
        doc["sweep"] = {"Gamma_over_2pi": [50.0]}
        del doc["gamma_range"]
        _, table = run(tmp_path, "gamma-sweep", doc)
        assert len(table.rows) == 1
        assert table.footer["optimal_Gamma_over_2pi"] == pytest.approx(50.0, rel=1e-14)
        assert table.footer["optimal_nb"] == table.rows[0][1]

    def test_optimum_increases(self, tmp_path):
        best = []
        for na in (50, 300, 10000):
            _, table = run(tmp_path, "gamma-sweep", load_doc(f"fig3_nbar_a{na}.json"))
            best.append(table.footer["optimal_Gamma_over_2pi"])
        assert best[0] < best[1] < best[2]

    def test_requires_gamma_sweep(self, tmp_path):
        doc = load_doc("fig3_nbar_a300.json")
        doc["sweep"] = {"nbar_a": [1.0]}
        code, _ = run(tmp_path, "gamma-sweep", doc)
        assert code == cli.EXIT_CONFIG


class TestEvolve:
    def test_full(self, tmp_path):
        code, table = run(tmp_path, "evolve", tiny_evolve())
        assert code == 0
        assert table.columns == ["t", "n_b", "n_a", "n_s", "trace_error"]
        assert table.header["dims"] == [2, 5, 4]
        assert max(table.column("trace_error")) < 1e-8
        assert table.footer["final_n_b"] == table.rows[-1][1]

    def test_reduced(self, tmp_path):
        code, table = run(tmp_path, "evolve", tiny_evolve("evolve-reduced"))
        assert code == 0 and table.columns == ["t", "n_b", "n_s", "trace_error"]

    def test_meanfield_fig5(self, tmp_path):
        code, table = run(tmp_path, "evolve", load_doc("fig5_meanfield.json"))
        assert code == 0
        assert table.footer["final_n_b"] == pytest.approx(0.78, abs=0.01)

    def test_zero_coupling_flat(self, tmp_path):
        _, table = run(tmp_path, "evolve", tiny_evolve(g_a=0.0, g_b=0.0, g_ab=0.0))
        # spin starts in |0> and stays there; mode b starts thermal at its bath occupation
        nb = np.array(table.column("n_b"))
        ref = nb[0]
        assert np.abs(nb - ref).max() < 1e-12
        p = ReducedParams(10.0, 10.0, 0.0, 0.0, 1.0, 1.0, 5.0, 1.0, 0.5)
        assert mf.stationary_nb(p) == 0.5

    def test_instability_exit_code(self, tmp_path):
        doc = tiny_evolve()
        doc["integrator"] = {"dt": 0.5, "t_final": 5.0}
        code, _ = run(tmp_path, "evolve", doc)
        assert code == cli.EXIT_NUMERICAL

    def test_wrong_subcommand(self, tmp_path):
        code, _ = run(tmp_path, "compare", tiny_evolve())
        assert code == cli.EXIT_CONFIG


class TestCompare:
    def doc(self, **extra):
        doc = tiny_evolve("compare")
        doc["sweep"] = [["Gamma", [5.0, 8.0]], ["nbar_a", [0.5, 1.0]]]
        doc.update(extra)
        return doc

    def test_rows(self, tmp_path):
        code, table = run(tmp_path, "compare", self.doc())
        assert code == 0
        assert table.columns == ["nbar_a", "Gamma", "nb_numeric", "nb_analytic", "abs_diff", "rel_diff"]
        assert [(r[0], r[1]) for r in table.rows] == [(0.5, 5.0), (1.0, 5.0), (0.5, 8.0), (1.0, 8.0)]
        for r in table.rows:
            assert r[4] == pytest.approx(abs(r[2] - r[3]), rel=1e-12)

    def test_check_exit_codes(self, tmp_path):
        code, _ = run(tmp_path, "compare", self.doc(check_tol=10.0), "--check")
        assert code == 0
        code, _ = run(tmp_path, "compare", self.doc(check_tol=1e-12), "--check")
        assert code == cli.EXIT_CHECK

    def test_threads_preserve_order(self, tmp_path):
        _, serial = run(tmp_path, "compare", self.doc())
        _, parallel = run(tmp_path, "compare", self.doc(), "--threads", "2")
        assert parallel.rows == serial.rows

    def test_ci_profile_filters(self, tmp_path):
        doc = self.doc()
        doc["sweep"] = [["Gamma", [5.0]], ["nbar_a", [1.0, 3.0]]]
        doc["integrator"]["t_final"] = 0.01
        doc["integrator"]["dt"] = 1e-3
        _, table = run(tmp_path, "compare", doc, "--profile", "ci")
        assert table.column("nbar_a") == [1.0]
        assert table.header["dims"] == {"1": [25, 10]}
        assert any("ci profile" in c for c in table.comments)


class TestDeriveParams:
    def test_reference_device(self, tmp_path):
        code, table = run(tmp_path, "derive-params", load_doc("derive_reference.json"))
        assert code == 0
        rows = {r[0]: dict(zip(table.columns[1:], r[1:])) for r in table.rows}
        assert rows["gamma_a"]["value_over_2pi"] == pytest.approx(1.0)
        assert rows["gamma_b"]["value_renormalized"] == pytest.approx(1.0)
        assert rows["g_a"]["value_si"] / rows["g_b"]["value_si"] == pytest.approx(3.0)
        assert rows["g_a"]["value_si"] / rows["g_ab"]["value_si"] == pytest.approx(math.sqrt(3))
        assert rows["nbar_b"]["value_si"] == pytest.approx(7.0, abs=0.1)

    def test_quality_factor_scaling(self, tmp_path):
        doc = load_doc("derive_reference.json")
        doc["physical"]["quality_factor"] = 1e8
        _, table = run(tmp_path, "derive-params", doc)
        rows = {r[0]: r[1:] for r in table.rows}
        assert rows["gamma_a"][1] == pytest.approx(0.1)

    def test_heating_temperature(self, tmp_path):
        doc = load_doc("derive_reference.json")
        doc["derive"] = {"heating_temperature": 10.8e-3}
        _, table = run(tmp_path, "derive-params", doc)
        rows = {r[0]: r[1:] for r in table.rows}
        assert rows["nbar_a"][0] == pytest.approx(md.bose_occupation(TWO_PI * 1e7, 10.8e-3))

    def test_invalid_physical(self, tmp_path):
        doc = load_doc("derive_reference.json")
        doc["physical"]["mass_a"] = 0
        code, _ = run(tmp_path, "derive-params", doc)
        assert code == cli.EXIT_CONFIG


class TestDeterminism:
    @pytest.mark.parametrize("command, doc", [("analytic-sweep", "fig2a.json"), ("evolve", None)])
    def test_byte_identical(self, tmp_path, command, doc):
        doc = load_doc(doc) if doc else tiny_evolve()
        cfg = write(tmp_path, doc)
        outs = []
        for i in range(2):
            out = tmp_path / f"out{i}.csv"
            assert cli.main([command, "--config", str(cfg), "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_round_trip_precision(self, tmp_path):
        _, table = run(tmp_path, "analytic-sweep", load_doc("fig2a.json"))
        p = load_config(CONFIGS / "fig2a.json").params.replace(nbar_a=160.0)
        assert table.rows[4][1] == mf.stationary_nb(ReducedParams.from_system(p))

    def test_stdout(self, tmp_path, capsys):
        cfg = write(tmp_path, load_doc("fig2a.json"))
        assert cli.main(["analytic-sweep", "--config", str(cfg)]) == 0
        assert "nb_stationary" in capsys.readouterr().out
