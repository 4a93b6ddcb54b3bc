"""Scenario files: schema, signals, writers and built-in benchmarks.

A scenario file is one JSON object holding the network (inline or as a
path), the space and time discretization, the constitutive law, one
boundary condition per boundary node, the initial condition and the
output configuration. Loading validates everything and returns a
runtime Scenario; saving a loaded scenario reproduces an equivalent
file.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .constitutive import law_from_dict
from .errors import SchemaError
from .network import topology_from_dict
from .timestepper import (
    BoundaryCondition,
    NewtonSettings,
    OutputConfig,
    Scenario,
    Trajectory,
)

log = logging.getLogger(__name__)


# -- time signals ---------------------------------------------------------------


@dataclass(frozen=True)
class ConstantSignal:
    value: float

    def __call__(self, t):
        return self.value

    def to_dict(self):
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True)
class TableSignal:
    """Piecewise-linear signal; repeated abscissas encode jumps."""

    points: tuple

    def __post_init__(self):
        xs = [p[0] for p in self.points]
        if len(xs) < 2 or any(b < a for a, b in zip(xs, xs[1:])):
            raise SchemaError("table signal needs nondecreasing times, >= 2 points")

    def __call__(self, t):
        xs = np.array([p[0] for p in self.points])
        vs = np.array([p[1] for p in self.points])
        return float(np.interp(t, xs, vs))

    def to_dict(self):
        return {"type": "table", "points": [list(p) for p in self.points]}


@dataclass(frozen=True)
class RampProfileSignal:
    """Ramp up, ramp down, then hold at half amplitude.

    value(t) = base + amplitude * w(t / t_star) with w(s) = s on [0, 1),
    2 - s on [1, 1.5) and 0.5 afterwards.
    """

    base: float
    amplitude: float
    t_star: float

    def __post_init__(self):
        if self.t_star <= 0:
            raise SchemaError("ramp profile needs t_star > 0")

    def __call__(self, t):
        s = t / self.t_star
        if s < 0:
            w = 0.0
        elif s < 1.0:
            w = s
        elif s < 1.5:
            w = 2.0 - s
        else:
            w = 0.5
        return self.base + self.amplitude * w

    def to_dict(self):
        return {
            "type": "ramp_profile",
            "base": self.base,
            "amplitude": self.amplitude,
            "t_star_s": self.t_star,
        }


def signal_from_dict(data: dict, where: str):
    try:
        kind = data["type"]
    except (KeyError, TypeError):
        raise SchemaError(f"{where}: signal needs a 'type'") from None
    if kind == "constant":
        return ConstantSignal(value=float(data["value"]))
    if kind == "table":
        return TableSignal(points=tuple((float(t), float(v)) for t, v in data["points"]))
    if kind == "ramp_profile":
        return RampProfileSignal(
            base=float(data["base"]),
            amplitude=float(data["amplitude"]),
            t_star=float(data["t_star_s"]),
        )
    raise SchemaError(f"{where}: unknown signal type {kind!r}")


# -- scenario loading --------------------------------------------------------------


def _require(data: dict, key: str, where: str):
    try:
        return data[key]
    except (KeyError, TypeError):
        raise SchemaError(f"{where}: missing '{key}'") from None


def scenario_from_dict(data: dict, base_dir: str = ".") -> Scenario:
    network = _require(data, "network", "/")
    if isinstance(network, str):
        path = os.path.join(base_dir, network)
        with open(path, "r", encoding="utf-8") as fh:
            network = json.load(fh)
    topology = topology_from_dict(network)
    if any(e.diameter is None for e in topology.edges):
        log.warning("network has edges without a diameter; unit fields are "
                    "treated as dimensionless")

    space = _require(data, "space", "/")
    q = int(_require(space, "q", "/space"))
    dx_max = float(space["dx_max_m"]) if "dx_max_m" in space else None

    law = law_from_dict(_require(data, "law", "/"))
    if law.lam > 0 and any(e.diameter is None for e in topology.edges):
        raise SchemaError("friction requires a diameter on every edge")

    bcs_data = _require(data, "bcs", "/")
    bcs = []
    for node in topology.boundary_nodes:
        if node not in bcs_data:
            raise SchemaError(f"/bcs: missing boundary condition for node {node!r}")
        rec = bcs_data[node]
        kind = _require(rec, "type", f"/bcs/{node}")
        signal = signal_from_dict(_require(rec, "signal", f"/bcs/{node}"), f"/bcs/{node}/signal")
        edge, _ = topology.adjacent_edges(node)[0]
        bcs.append(BoundaryCondition(node_id=node, kind=kind, signal=signal,
                                     area=edge.area))
    extra = set(bcs_data) - set(topology.boundary_nodes)
    if extra:
        raise SchemaError(f"/bcs: conditions for non-boundary node(s) {sorted(extra)}")

    initial_data = _require(data, "initial", "/")
    ikind = _require(initial_data, "type", "/initial")
    if ikind == "fields":
        rho = {k: [(float(x), float(v)) for x, v in tab]
               for k, tab in _require(initial_data, "rho", "/initial").items()}
        m = {k: [(float(x), float(v)) for x, v in tab]
             for k, tab in _require(initial_data, "m", "/initial").items()}
        for e in topology.edges:
            if e.id not in rho or e.id not in m:
                raise SchemaError(f"/initial: missing field table for edge {e.id!r}")
        initial = ("fields", rho, m)
    elif ikind == "steady":
        initial = ("steady",)
    else:
        raise SchemaError(f"/initial: unknown type {ikind!r}")

    time_cfg = _require(data, "time", "/")
    dt = float(_require(time_cfg, "dt_s", "/time"))
    t_end = float(_require(time_cfg, "t_end_s", "/time"))

    quad = data.get("quadrature", {})
    quad_points = int(quad["points_per_element"]) if "points_per_element" in quad else None

    newton_cfg = data.get("newton", {})
    newton = NewtonSettings(
        abs_tol=float(newton_cfg.get("abs_tol", 1e-10)),
        max_iter=int(newton_cfg.get("max_iter", 25)),
        max_halvings=int(newton_cfg.get("max_halvings", 8)),
    )

    out_cfg = data.get("output", {})
    probes = tuple(
        (p["edge"], float(p["x"])) for p in out_cfg.get("probes", [])
    )
    for eid, x in probes:
        edge = topology.edge(eid)
        if not (0.0 <= x <= edge.length):
            raise SchemaError(f"/output: probe at x={x} off edge {eid!r}")
    output = OutputConfig(
        cadence=int(out_cfg.get("cadence", 1)),
        probes=probes,
        out_dir=out_cfg.get("out_dir"),
    )

    scenario = Scenario(
        name=str(data.get("name", "scenario")),
        topology=topology,
        law=law,
        q=q,
        dx_max=dx_max,
        bcs=tuple(bcs),
        initial=initial,
        dt=dt,
        t_end=t_end,
        quadrature_points=quad_points,
        newton=newton,
        output=output,
    )
    # signals must cover the horizon
    for bc in scenario.bcs:
        if isinstance(bc.signal, TableSignal):
            ts = [p[0] for p in bc.signal.points]
            if ts[0] > 0.0 or ts[-1] < scenario.t_end:
                raise SchemaError(
                    f"/bcs/{bc.node_id}: table signal must cover [0, {scenario.t_end}]"
                )
    return scenario


def load_scenario(path: str) -> Scenario:
    """Load and fully validate a scenario file."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return scenario_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


def scenario_to_dict(scenario: Scenario) -> dict:
    """Serializable form of a runtime scenario (network inlined)."""
    bcs = {}
    for bc in scenario.bcs:
        bcs[bc.node_id] = {"type": bc.kind, "signal": bc.signal.to_dict()}
    initial = {"type": scenario.initial[0]}
    if scenario.initial[0] == "fields":
        initial["rho"] = {k: [list(p) for p in tab] for k, tab in scenario.initial[1].items()}
        initial["m"] = {k: [list(p) for p in tab] for k, tab in scenario.initial[2].items()}
    space = {"q": scenario.q}
    if scenario.dx_max is not None:
        space["dx_max_m"] = scenario.dx_max
    data = {
        "name": scenario.name,
        "network": scenario.topology.to_dict(),
        "space": space,
        "law": scenario.law.to_dict(),
        "bcs": bcs,
        "initial": initial,
        "time": {"dt_s": scenario.dt, "t_end_s": scenario.t_end},
        "newton": {
            "abs_tol": scenario.newton.abs_tol,
            "max_iter": scenario.newton.max_iter,
            "max_halvings": scenario.newton.max_halvings,
        },
        "output": {
            "cadence": scenario.output.cadence,
            "probes": [{"edge": e, "x": x} for e, x in scenario.output.probes],
        },
    }
    if scenario.quadrature_points is not None:
        data["quadrature"] = {"points_per_element": scenario.quadrature_points}
    if scenario.output.out_dir is not None:
        data["output"]["out_dir"] = scenario.output.out_dir
    return data


def save_scenario(scenario: Scenario, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- run output writers -------------------------------------------------------------


def _fmt(value) -> str:
    return f"{value:.17g}" if isinstance(value, float) else str(value)


def write_probe_csvs(traj: Trajectory, out_dir: str) -> list[str]:
    paths = []
    for i, (edge_id, x) in enumerate(traj.scenario.output.probes):
        name = f"probe_{edge_id}_{x:g}.csv".replace("/", "_")
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,rho,m\n")
            for t, vals in traj.probe_rows:
                fh.write(f"{_fmt(float(t))},{_fmt(float(vals[i, 0]))},{_fmt(float(vals[i, 1]))}\n")
        paths.append(path)
    return paths


def write_state_csv(traj_or_state, out_dir: str, name: str = "final_state.csv") -> str:
    """Sample (rho, m) on every edge at the flux nodal points."""
    if isinstance(traj_or_state, Trajectory):
        sp = traj_or_state.sp
        a1, a2 = traj_or_state.final_state
    else:
        sp, (a1, a2) = traj_or_state
    path = os.path.join(out_dir, name)
    a2_full = sp.E @ a2
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("edge,x,rho,m\n")
        for e in sp.edges:
            j = sp.partition.counts[e.id]
            h = sp.partition.h(e.id)
            nodes = (sp.v2_nodes + 1.0) / 2.0
            xs = np.unique(np.concatenate(
                [(k * h + nodes * h) for k in range(j)]
            ))
            rho = sp.eval_density(a1, e.id, xs)
            m = sp.eval_flux(a2, e.id, xs, a2_full=a2_full)
            for x, r_val, m_val in zip(xs, rho, m):
                fh.write(f"{e.id},{_fmt(float(x))},{_fmt(float(r_val))},{_fmt(float(m_val))}\n")
    return path


def run_metadata(scenario: Scenario, traj: Trajectory | None = None) -> dict:
    """Every knob that affects the numbers, echoed for reproducibility."""
    from . import __version__

    partition_counts = {}
    if traj is not None:
        partition_counts = dict(traj.sp.partition.counts)
    meta = {
        "package_version": __version__,
        "scenario": scenario_to_dict(scenario),
        "resolved_elements": partition_counts,
        "density_bc_variants": {
            bc.node_id: bc.kind for bc in scenario.bcs
            if bc.kind in ("density", "pressure_only_density")
        },
        "quadrature_points_per_element": (
            scenario.quadrature_points if scenario.quadrature_points is not None
            else scenario.q + 2
        ),
    }
    if traj is not None:
        meta["steady_initialization"] = traj.steady_info
        meta["spd_violation_steps"] = traj.spd_violation_steps
        meta["newton_tolerance_last"] = traj.records[-1].newton_tol if traj.records else None
        meta["energy_loss"] = traj.energy_loss()
    return meta


def write_run_outputs(traj: Trajectory, out_dir: str) -> dict:
    """Write probe CSVs, the diagnostics CSV and the metadata JSON."""
    from . import diagnostics as diag

    os.makedirs(out_dir, exist_ok=True)
    paths = {"probes": write_probe_csvs(traj, out_dir)}
    diag_path = os.path.join(out_dir, "diagnostics.csv")
    diag.write_csv(diag_path, traj.records)
    paths["diagnostics"] = diag_path
    state_path = write_state_csv(traj, out_dir)
    paths["final_state"] = state_path
    meta_path = os.path.join(out_dir, "run_metadata.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(run_metadata(traj.scenario, traj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["metadata"] = meta_path
    return paths


# -- built-in benchmarks --------------------------------------------------------------


def dam_break_dict() -> dict:
    """Frictionless shock-tube scenario on a single dimensionless channel.

    The channel spans [0, 10] (shifted from the symmetric interval by 5);
    the density jumps from 3 to 1 at the midpoint and both ends are
    closed (zero flow).
    """
    return {
        "name": "dam_break",
        "network": {
            "nodes": [
                {"id": "left", "type": "boundary"},
                {"id": "right", "type": "boundary"},
            ],
            "edges": [
                {"id": "channel", "from": "left", "to": "right",
                 "length_m": 10.0, "area_m2": 1.0, "num_elements": 200}
            ],
        },
        "space": {"q": 0, "dx_max_m": 0.05},
        "law": {"pressure": {"type": "isentropic", "c": 0.5}, "lambda": 0.0},
        "bcs": {
            "left": {"type": "flow", "signal": {"type": "constant", "value": 0.0}},
            "right": {"type": "flow", "signal": {"type": "constant", "value": 0.0}},
        },
        "initial": {
            "type": "fields",
            "rho": {"channel": [[0.0, 3.0], [5.0, 3.0], [5.0, 1.0], [10.0, 1.0]]},
            "m": {"channel": [[0.0, 0.0], [10.0, 0.0]]},
        },
        "time": {"dt_s": 0.0005, "t_end_s": 2.0},
        "quadrature": {"points_per_element": 2},
        "output": {
            "cadence": 400,
            "probes": [
                {"edge": "channel", "x": 2.5},
                {"edge": "channel", "x": 5.0},
                {"edge": "channel", "x": 7.5},
            ],
            "out_dir": "out/dam_break",
        },
    }


def y_network_dict() -> dict:
    """Small three-edge junction network with transient flow data."""
    return {
        "name": "y_network",
        "network": {
            "nodes": [
                {"id": "n1", "type": "boundary"},
                {"id": "n2", "type": "interior"},
                {"id": "n3", "type": "boundary"},
                {"id": "n4", "type": "boundary"},
            ],
            "edges": [
                {"id": "w1", "from": "n1", "to": "n2", "length_m": 1.0,
                 "area_m2": 1.0, "num_elements": 10},
                {"id": "w2", "from": "n2", "to": "n3", "length_m": 1.0,
                 "area_m2": 0.6, "num_elements": 10},
                {"id": "w3", "from": "n2", "to": "n4", "length_m": 1.0,
                 "area_m2": 0.4, "num_elements": 10},
            ],
        },
        "space": {"q": 0},
        "law": {"pressure": {"type": "isentropic", "c": 0.5}, "lambda": 0.0},
        "bcs": {
            "n1": {"type": "flow",
                   "signal": {"type": "table",
                              "points": [[0.0, 0.0], [0.2, 0.1], [2.0, 0.1]]}},
            "n3": {"type": "flow",
                   "signal": {"type": "table",
                              "points": [[0.0, 0.0], [0.2, -0.06], [2.0, -0.06]]}},
            "n4": {"type": "flow",
                   "signal": {"type": "table",
                              "points": [[0.0, 0.0], [0.2, -0.04], [2.0, -0.04]]}},
        },
        "initial": {
            "type": "fields",
            "rho": {"w1": [[0.0, 1.0], [1.0, 1.0]],
                    "w2": [[0.0, 1.0], [1.0, 1.0]],
                    "w3": [[0.0, 1.0], [1.0, 1.0]]},
            "m": {"w1": [[0.0, 0.0], [1.0, 0.0]],
                  "w2": [[0.0, 0.0], [1.0, 0.0]],
                  "w3": [[0.0, 0.0], [1.0, 0.0]]},
        },
        "time": {"dt_s": 0.01, "t_end_s": 2.0},
        "quadrature": {"points_per_element": 2},
        "output": {
            "cadence": 20,
            "probes": [{"edge": "w1", "x": 0.5}, {"edge": "w2", "x": 1.0}],
            "out_dir": "out/y_network",
        },
    }


def pipeline_dict() -> dict:
    """Synthetic friction-dominated pipeline network.

    Ten pipes, four junctions (two of degree four) and six boundary
    nodes with mixed density/flow data driven by a ramp profile. This is
    a representative instance for the regime, not a published topology.
    """
    t_star = 3600.0
    edges = [
        ("p01", "b1", "j1", 20000.0, 1.0),
        ("p02", "j1", "j2", 15000.0, 0.9),
        ("p03", "j2", "b2", 10000.0, 0.6),
        ("p04", "j2", "j3", 25000.0, 0.8),
        ("p05", "j3", "b3", 12000.0, 0.6),
        ("p06", "j1", "j4", 18000.0, 0.8),
        ("p07", "j4", "j3", 16000.0, 0.7),
        ("p08", "j4", "b4", 8000.0, 0.5),
        ("p09", "b5", "j4", 22000.0, 0.9),
        ("p10", "j2", "b6", 9000.0, 0.5),
    ]
    return {
        "name": "pipeline",
        "network": {
            "nodes": [
                {"id": n, "type": "boundary"} for n in ("b1", "b2", "b3", "b4", "b5", "b6")
            ] + [
                {"id": n, "type": "interior"} for n in ("j1", "j2", "j3", "j4")
            ],
            "edges": [
                {"id": eid, "from": a, "to": b, "length_m": ell, "diameter_m": d}
                for eid, a, b, ell, d in edges
            ],
        },
        "space": {"q": 0, "dx_max_m": 500.0},
        "law": {
            "pressure": {"type": "isothermal_alpha", "R": 518.0, "T": 283.0,
                         "alpha": -3e-8, "rho_star": 1.0},
            "lambda": 0.01,
        },
        "bcs": {
            "b1": {"type": "density",
                   "signal": {"type": "ramp_profile", "base": 65.0,
                              "amplitude": 10.0, "t_star_s": t_star}},
            "b2": {"type": "density",
                   "signal": {"type": "ramp_profile", "base": 50.0,
                              "amplitude": 10.0, "t_star_s": t_star}},
            "b3": {"type": "flow", "signal": {"type": "constant", "value": -100.0}},
            "b4": {"type": "density",
                   "signal": {"type": "ramp_profile", "base": 60.0,
                              "amplitude": -10.0, "t_star_s": t_star}},
            "b5": {"type": "density", "signal": {"type": "constant", "value": 60.0}},
            "b6": {"type": "density", "signal": {"type": "constant", "value": 45.0}},
        },
        "initial": {"type": "steady"},
        "time": {"dt_s": 5.0, "t_end_s": 5.0 * t_star},
        "quadrature": {"points_per_element": 2},
        "output": {
            "cadence": 60,
            "probes": [
                {"edge": "p02", "x": 15000.0},
                {"edge": "p04", "x": 25000.0},
                {"edge": "p07", "x": 16000.0},
            ],
            "out_dir": "out/pipeline",
        },
    }


BENCHMARKS = {
    "dam-break": dam_break_dict,
    "y-network": y_network_dict,
    "pipeline": pipeline_dict,
}


def write_benchmark(name: str, out_dir: str) -> str:
    try:
        builder = BENCHMARKS[name]
    except KeyError:
        raise SchemaError(
            f"unknown benchmark {name!r}; available: {sorted(BENCHMARKS)}"
        ) from None
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name.replace("-", "_") + ".json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(builder(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
