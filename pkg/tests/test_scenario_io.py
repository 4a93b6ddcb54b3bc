"""Scenario files, signals, benchmark generators and the CLI surface."""

import json
import os

import numpy as np
import pytest

from phflow.cli import main
from phflow.constitutive import IsentropicLaw, IsothermalAlphaLaw
from phflow.errors import SchemaError
from phflow.scenario_io import (
    BENCHMARKS,
    ConstantSignal,
    RampProfileSignal,
    TableSignal,
    dam_break_dict,
    load_scenario,
    pipeline_dict,
    run_metadata,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    signal_from_dict,
    y_network_dict,
)


class TestSignals:
    def test_constant(self):
        s = ConstantSignal(3.0)
        assert s(0.0) == 3.0 and s(100.0) == 3.0

    def test_table_interpolation_and_jump(self):
        s = TableSignal(((0.0, 0.0), (1.0, 2.0), (1.0, 5.0), (2.0, 5.0)))
        assert s(0.5) == pytest.approx(1.0)
        assert s(1.0) == 5.0  # right value at the jump
        assert s(1.5) == 5.0

    def test_table_needs_sorted_times(self):
        with pytest.raises(SchemaError):
            TableSignal(((1.0, 0.0), (0.0, 1.0)))

    def test_ramp_profile_shape(self):
        s = RampProfileSignal(base=65.0, amplitude=10.0, t_star=3600.0)
        assert s(0.0) == 65.0
        assert s(1800.0) == pytest.approx(70.0)      # half way up
        assert s(3600.0) == pytest.approx(75.0)      # peak
        assert s(4500.0) == pytest.approx(72.5)      # half way down
        assert s(5400.0) == pytest.approx(70.0)      # hold at half amplitude
        assert s(30000.0) == pytest.approx(70.0)

    def test_signal_from_dict_unknown(self):
        with pytest.raises(SchemaError):
            signal_from_dict({"type": "sine"}, "here")


class TestScenarioLoading:
    def test_dam_break_parameters(self):
        sc = scenario_from_dict(dam_break_dict())
        assert sc.topology.edge("channel").length == 10.0
        assert isinstance(sc.law.pressure, IsentropicLaw)
        assert sc.law.pressure.c == 0.5
        assert sc.law.lam == 0.0
        assert all(bc.kind == "flow" and bc.signal(0.3) == 0.0 for bc in sc.bcs)
        assert sc.t_end == 2.0
        assert sc.dt == 0.0005

    def test_pipeline_parameters(self):
        sc = scenario_from_dict(pipeline_dict())
        assert isinstance(sc.law.pressure, IsothermalAlphaLaw)
        assert sc.law.pressure.R == 518.0
        assert sc.law.pressure.T == 283.0
        assert sc.law.pressure.alpha == -3e-8
        kinds = {bc.node_id: bc.kind for bc in sc.bcs}
        assert kinds["b3"] == "flow"
        assert sum(1 for k in kinds.values() if k == "density") == 5
        assert sc.initial == ("steady",)

    def test_y_network_valid(self):
        sc = scenario_from_dict(y_network_dict())
        assert len(sc.topology.interior_nodes) == 1

    def test_missing_bc_names_node(self):
        d = dam_break_dict()
        del d["bcs"]["right"]
        with pytest.raises(SchemaError, match="right"):
            scenario_from_dict(d)

    def test_bc_for_unknown_node(self):
        d = dam_break_dict()
        d["bcs"]["ghost"] = {"type": "flow", "signal": {"type": "constant", "value": 0}}
        with pytest.raises(SchemaError):
            scenario_from_dict(d)

    def test_table_signal_must_cover_horizon(self):
        d = y_network_dict()
        d["bcs"]["n1"]["signal"] = {"type": "table", "points": [[0.0, 0.0], [1.0, 0.1]]}
        with pytest.raises(SchemaError, match="cover"):
            scenario_from_dict(d)

    def test_probe_off_edge(self):
        d = dam_break_dict()
        d["output"]["probes"] = [{"edge": "channel", "x": 12.0}]
        with pytest.raises(SchemaError):
            scenario_from_dict(d)

    def test_friction_needs_diameter(self):
        d = dam_break_dict()
        d["law"]["lambda"] = 0.01
        with pytest.raises(SchemaError, match="diameter"):
            scenario_from_dict(d)

    def test_network_from_file_path(self, tmp_path):
        d = dam_break_dict()
        net = d["network"]
        net_path = tmp_path / "net.json"
        net_path.write_text(json.dumps(net))
        d["network"] = "net.json"
        sc_path = tmp_path / "scenario.json"
        sc_path.write_text(json.dumps(d))
        sc = load_scenario(str(sc_path))
        assert sc.topology.edge("channel").length == 10.0

    def test_roundtrip_semantically_identical(self, tmp_path):
        sc = scenario_from_dict(pipeline_dict())
        path = tmp_path / "s.json"
        save_scenario(sc, str(path))
        again = load_scenario(str(path))
        assert scenario_to_dict(again) == scenario_to_dict(sc)

    def test_packaged_benchmarks_match_generators(self):
        import importlib.resources as res

        for name, builder in BENCHMARKS.items():
            fname = name.replace("-", "_") + ".json"
            packaged = json.loads(
                res.files("phflow").joinpath("data", fname).read_text()
            )
            assert packaged == builder(), name


class TestMetadata:
    def test_knobs_echoed(self):
        sc = scenario_from_dict(pipeline_dict())
        meta = run_metadata(sc)
        assert meta["scenario"]["law"]["lambda"] == 0.01
        assert meta["density_bc_variants"]["b1"] == "density"
        assert meta["quadrature_points_per_element"] == 2
        assert meta["scenario"]["newton"]["abs_tol"] == 1e-10


class TestCli:
    def test_benchmark_writes_loadable_scenarios(self, tmp_path):
        for name in BENCHMARKS:
            assert main(["benchmark", name, "--out", str(tmp_path)]) == 0
            sc = load_scenario(str(tmp_path / (name.replace("-", "_") + ".json")))
            assert sc.name

    def test_simulate_writes_outputs(self, tmp_path):
        d = y_network_dict()
        d["time"] = {"dt_s": 0.01, "t_end_s": 0.1}
        path = tmp_path / "y.json"
        path.write_text(json.dumps(d))
        out = tmp_path / "out"
        assert main(["simulate", str(path), "--out", str(out)]) == 0
        assert (out / "diagnostics.csv").exists()
        assert (out / "run_metadata.json").exists()
        assert (out / "final_state.csv").exists()
        probe_files = [p for p in os.listdir(out) if p.startswith("probe_")]
        assert len(probe_files) == 2
        header = (out / "diagnostics.csv").read_text().splitlines()[0]
        assert header.startswith("t,mass,hamiltonian,boundary_power")

    def test_simulate_failure_exit_code(self, tmp_path):
        d = y_network_dict()
        d["time"] = {"dt_s": 0.01, "t_end_s": 0.1}
        d["newton"] = {"abs_tol": 1e-10, "max_iter": 1, "max_halvings": 0}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(d))
        assert main(["simulate", str(path), "--out", str(tmp_path / "o")]) == 1

    def test_steady_subcommand(self, tmp_path):
        d = pipeline_dict()
        path = tmp_path / "p.json"
        path.write_text(json.dumps(d))
        out = tmp_path / "steady"
        assert main(["steady", str(path), "--out", str(out)]) == 0
        assert (out / "steady_state.csv").exists()
        meta = json.loads((out / "steady_metadata.json").read_text())
        flows = np.array(meta["boundary_flows"])
        assert abs(flows.sum()) < 1e-8

    def test_check_subcommand_passes(self, tmp_path, capsys):
        d = y_network_dict()
        path = tmp_path / "y.json"
        path.write_text(json.dumps(d))
        assert main(["check", str(path)]) == 0
        assert "all checks passed" in capsys.readouterr().out

    def test_convergence_subcommand(self, tmp_path, capsys):
        d = dam_break_dict()
        d["time"] = {"dt_s": 0.01, "t_end_s": 0.2}
        path = tmp_path / "d.json"
        path.write_text(json.dumps(d))
        rc = main(["convergence", str(path), "--dx", "0.5,0.25",
                   "--ref-dx", "0.125", "--subdomain", "edge:channel:0:5",
                   "--out", str(tmp_path / "conv")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "estimated order" in out
        assert (tmp_path / "conv" / "convergence.csv").exists()

    def test_usage_error_exit_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["simulate"])  # missing scenario argument
        assert exc.value.code == 2

    def test_unknown_benchmark(self):
        with pytest.raises(SystemExit) as exc:
            main(["benchmark", "nonexistent"])
        assert exc.value.code == 2
