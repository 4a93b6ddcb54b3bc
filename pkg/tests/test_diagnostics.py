"""Step records, error norms and convergence-order estimation."""

import numpy as np
import pytest

from phflow import assembly, diagnostics
from phflow.assembly import assemble_static
from phflow.constitutive import ConstitutiveLaw, IsentropicLaw
from phflow.diagnostics import convergence_order, l2_error, record, write_csv
from phflow.errors import SchemaError
from phflow.femspace import Partition, build_space_pair
from phflow.network import Edge, NetworkTopology
from phflow.scenario_io import dam_break_dict, scenario_from_dict
from phflow.timestepper import simulate


def unit_edge_space(elements=10, q=0, length=1.0):
    topo = NetworkTopology(
        nodes=("a", "b"),
        edges=(Edge("e", "a", "b", length, area=1.0, num_elements=elements),),
        boundary_nodes=("a", "b"),
    )
    sp = build_space_pair(topo, Partition.build(topo), q)
    ops = assemble_static(sp, topo, ConstitutiveLaw(IsentropicLaw(0.5)))
    return sp, ops


class TestRecord:
    def test_equilibrium_step(self):
        sp, ops = unit_edge_space()
        a1 = 1.5 * np.ones(ops.n1)
        a2 = np.zeros(ops.n2)
        e = np.array([1.5, 1.5])
        f = np.zeros(2)
        rec = record(ops, (a1, a2), (a1, a2), e, f, 0.1, t_k=0.1)
        assert rec.dissipation_slack == pytest.approx(0.0, abs=1e-14)
        assert rec.mass_balance_residual == pytest.approx(0.0, abs=1e-14)
        assert rec.local_conservation_residual == 0.0
        assert rec.total_mass == pytest.approx(1.5)
        assert rec.hamiltonian == pytest.approx(0.5 * 1.5**2)

    def test_telescoping_slack_sum(self):
        d = dam_break_dict()
        d["space"]["dx_max_m"] = 0.25
        d["time"] = {"dt_s": 0.01, "t_end_s": 0.3}
        traj = simulate(scenario_from_dict(d))
        h0 = assembly.G_and_H(traj.ops, *traj.states[0])[1]
        h_end = assembly.G_and_H(traj.ops, *traj.final_state)[1]
        total = sum(r.dissipation_slack for r in traj.records)
        boundary = sum(
            r.boundary_power - r.friction_dissipation for r in traj.records
        ) * traj.scenario.dt
        assert total == pytest.approx(h0 - h_end + boundary, abs=1e-11)

    def test_csv_columns_and_precision(self, tmp_path):
        sp, ops = unit_edge_space()
        a1 = np.ones(ops.n1) * (1 + 1e-15)
        a2 = np.zeros(ops.n2)
        rec = record(ops, (a1, a2), (a1, a2), np.zeros(2), np.zeros(2), 0.1, t_k=0.1)
        path = tmp_path / "diag.csv"
        write_csv(path, [rec])
        lines = path.read_text().splitlines()
        assert lines[0].split(",") == list(diagnostics.CSV_COLUMNS)
        mass_cell = lines[1].split(",")[1]
        assert float(mass_cell) == rec.total_mass  # 17 digits round-trip


class TestL2Error:
    def test_self_distance_zero(self):
        sp, _ = unit_edge_space()
        a = (np.ones(sp.n1), np.zeros(sp.n2))
        assert l2_error(sp, a, (sp, a), ("e", 0.0, 1.0)) == 0.0

    def test_piecewise_constant_sawtooth(self):
        # projecting x onto 10 constant cells leaves error 1/(20 sqrt(3))
        sp, _ = unit_edge_space(elements=10)
        a1 = (np.arange(10) + 0.5) / 10.0
        err = l2_error(sp, (a1, np.zeros(sp.n2)),
                       lambda eid, xs: xs, ("e", 0.0, 1.0))
        assert err == pytest.approx(1.0 / (20.0 * np.sqrt(3.0)), rel=1e-12)

    def test_flux_field_option(self):
        sp, _ = unit_edge_space(elements=1)
        a = (np.zeros(1), np.array([0.0, 1.0]))
        err = l2_error(sp, a, lambda eid, xs: np.zeros_like(xs),
                       ("e", 0.0, 1.0), field="m")
        assert err == pytest.approx(np.sqrt(1.0 / 3.0), rel=1e-12)

    def test_subdomain_restriction(self):
        sp, _ = unit_edge_space(elements=10)
        a1 = np.zeros(10)
        a1[0] = 1.0  # unit value on [0, 0.1)
        err_left = l2_error(sp, (a1, np.zeros(sp.n2)),
                            lambda eid, xs: np.zeros_like(xs), ("e", 0.0, 0.5))
        err_right = l2_error(sp, (a1, np.zeros(sp.n2)),
                             lambda eid, xs: np.zeros_like(xs), ("e", 0.5, 1.0))
        assert err_left == pytest.approx(np.sqrt(0.1), rel=1e-12)
        assert err_right == 0.0

    def test_mismatched_grids(self):
        # projections of x onto 4 and 12 cells: per coarse cell the
        # difference is (-1/12, 0, +1/12) on thirds, so the squared error
        # is 4 * 2 * (1/12)^2 * (1/12) = 1/216
        sp_c, _ = unit_edge_space(elements=4)
        sp_f, _ = unit_edge_space(elements=12)
        a_c = ((np.arange(4) + 0.5) / 4.0, np.zeros(sp_c.n2))
        a_f = ((np.arange(12) + 0.5) / 12.0, np.zeros(sp_f.n2))
        err = l2_error(sp_c, a_c, (sp_f, a_f), ("e", 0.0, 1.0))
        assert err == pytest.approx(np.sqrt(1.0 / 216.0), rel=1e-12)

    def test_off_edge_subdomain(self):
        sp, _ = unit_edge_space()
        with pytest.raises(SchemaError):
            l2_error(sp, (np.ones(sp.n1), np.zeros(sp.n2)), (sp, None), ("e", 0.0, 2.0))


class TestConvergenceOrder:
    def test_exact_first_order(self):
        assert convergence_order([(0.1, 0.1), (0.05, 0.05)]) == pytest.approx(1.0)

    def test_exact_second_order(self):
        assert convergence_order([(0.1, 0.01), (0.05, 0.0025)]) == pytest.approx(2.0)

    def test_least_squares_three_points(self):
        pts = [(0.2, 0.2), (0.1, 0.1), (0.05, 0.05)]
        assert convergence_order(pts) == pytest.approx(1.0)

    def test_degenerate_input(self):
        with pytest.raises(SchemaError):
            convergence_order([(0.1, 0.1)])
        with pytest.raises(SchemaError):
            convergence_order([(0.1, 0.0), (0.05, -1.0)])
