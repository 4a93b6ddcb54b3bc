"""Implicit Euler stepping with boundary closures and a steady solver.

Each step solves the nonlinear system

    M1 (a1 - a1_prev)           = dt * J a2
    n2(a) - n2(a_prev)          = dt * (c1(a) + K2 e - R(a) a2)
    k(e, K2^T a2, u(t))         = 0

jointly in (a2, e); the first block is linear with diagonal mass matrix
and is eliminated exactly, which makes the discrete mass balance and the
local conservation identity hold to round-off at every accepted step.
The per-step energy inequality then follows from the convexity of the
reduced conjugate functional.

A single simulation is sequential in time; independent scenarios can run
concurrently.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from . import assembly, diagnostics
from .assembly import DiscreteOperators, assemble_static
from .errors import BuildError, SchemaError, StateError, StepFailure
from .femspace import Partition, build_space_pair
from .network import NetworkTopology

log = logging.getLogger(__name__)

BC_KINDS = ("flow", "effort", "density", "pressure_only_density")


@dataclass(frozen=True)
class BoundaryCondition:
    """One closure per boundary node.

    kind "flow" prescribes the signed port flow (positive into the
    network), "effort" the boundary effort P'(rho) + v^2/2, "density"
    the boundary density realized through the effort with the kinetic
    contribution reconstructed from the flow unknown, and
    "pressure_only_density" the same without the kinetic term.
    """

    node_id: str
    kind: str
    signal: object          # callable t -> float
    area: float = 1.0       # area of the single adjacent edge

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise SchemaError(f"unknown boundary condition kind {self.kind!r}")

    def residual(self, law, e_val, f_val, t):
        u = self.signal(t)
        if self.kind == "flow":
            return f_val - u
        if self.kind == "effort":
            return e_val - u
        law.require_admissible(u, f"density boundary value at node {self.node_id!r}")
        target = law.pressure.P_prime(u)
        if self.kind == "density":
            target = target + f_val**2 / (2.0 * self.area**2 * u**2)
        return e_val - target

    def partials(self, law, e_val, f_val, t):
        """(d/d e, d/d f) of the closure residual."""
        if self.kind == "flow":
            return 0.0, 1.0
        if self.kind == "effort":
            return 1.0, 0.0
        if self.kind == "pressure_only_density":
            return 1.0, 0.0
        u = self.signal(t)
        return 1.0, -f_val / (self.area**2 * u**2)


@dataclass(frozen=True)
class NewtonSettings:
    """Controls for the per-step Newton solver."""

    abs_tol: float = 1e-10
    max_iter: int = 25
    max_halvings: int = 8

    def __post_init__(self):
        if self.abs_tol <= 0:
            raise SchemaError("Newton tolerance must be positive")

    def effective_tol(self, n_unknowns: int, state_scale: float) -> float:
        return self.abs_tol * np.sqrt(n_unknowns) * (1.0 + state_scale)


@dataclass
class NewtonStats:
    converged: bool
    iterations: int
    residual_norm: float
    tolerance: float
    halvings: int = 0


@dataclass
class StepResult:
    a1: np.ndarray
    a2: np.ndarray
    e: np.ndarray
    f: np.ndarray
    stats: NewtonStats


def boundary_state(ops: DiscreteOperators, a1: np.ndarray, a2: np.ndarray):
    """Density and flux values at the boundary nodes (port order)."""
    sp = ops.sp
    points = []
    for node in ops.topology.boundary_nodes:
        edge, _ = ops.topology.adjacent_edges(node)[0]
        x = 0.0 if node == edge.tail else edge.length
        points.append((edge.id, x))
    a2_full = sp.E @ a2
    rho = np.empty(len(points))
    m = np.empty(len(points))
    for i, (eid, x) in enumerate(points):
        xs = np.array([x])
        rho[i] = sp.eval_density(a1, eid, xs)[0]
        m[i] = sp.eval_flux(a2, eid, xs, a2_full=a2_full)[0]
    return rho, m


def effort_guess(ops: DiscreteOperators, a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    """Pointwise boundary effort, the natural initial guess for e."""
    rho, m = boundary_state(ops, a1, a2)
    return ops.law.effort(rho, m)


def _closure_arrays(ops, bcs, law, e, f, t):
    p = len(bcs)
    res = np.empty(p)
    de = np.empty(p)
    df = np.empty(p)
    for i, bc in enumerate(bcs):
        res[i] = bc.residual(law, e[i], f[i], t)
        de[i], df[i] = bc.partials(law, e[i], f[i], t)
    return res, de, df


def step(ops: DiscreteOperators, bcs, a1_prev, a2_prev, e_prev, t_k, dt,
         settings: NewtonSettings | None = None) -> StepResult:
    """Advance one implicit Euler step to time t_k.

    Returns the new state with boundary efforts and flows and the Newton
    statistics; non-convergence is reported through stats.converged with
    the last iterate returned.
    """
    settings = settings or NewtonSettings()
    law = ops.law
    n2_prev = assembly.n2_vec(ops, a1_prev, a2_prev)
    n2_dim, p = ops.n2, ops.n_ports
    tol = settings.effective_tol(n2_dim + p, float(np.max(np.abs(a1_prev), initial=0.0)))

    def a1_of(a2):
        return a1_prev - dt * (ops.D @ a2)

    def residual(x):
        a2 = x[:n2_dim]
        e = x[n2_dim:]
        a1 = a1_of(a2)
        f2 = (assembly.n2_vec(ops, a1, a2) - n2_prev
              - dt * (assembly.c1_vec(ops, a1, a2) + ops.K2 @ e
                      - assembly.friction_vec(ops, a1, a2)))
        f = ops.K2.T @ a2
        f3, _, _ = _closure_arrays(ops, bcs, law, e, f, t_k)
        return np.concatenate([f2, f3])

    def jacobian(x):
        a2 = x[:n2_dim]
        e = x[n2_dim:]
        a1 = a1_of(a2)
        n2_1, n2_2 = assembly.jacobian_n2(ops, a1, a2)
        c1_1, c1_2 = assembly.jacobian_c1(ops, a1, a2)
        if law.lam != 0.0:
            fr_1, fr_2 = assembly.jacobian_friction(ops, a1, a2)
            j_a1 = n2_1 - dt * (c1_1 - fr_1)
            j_a2 = n2_2 - dt * (c1_2 - fr_2)
        else:
            j_a1 = n2_1 - dt * c1_1
            j_a2 = n2_2 - dt * c1_2
        # chain rule through the eliminated linear density update
        j22 = j_a2 - dt * (j_a1 @ ops.D)
        f = ops.K2.T @ a2
        _, de, df = _closure_arrays(ops, bcs, law, e, f, t_k)
        j32 = sparse.diags(df) @ ops.K2.T
        return sparse.bmat(
            [[j22, -dt * ops.K2], [j32, sparse.diags(de)]], format="csc"
        )

    x = np.concatenate([a2_prev, e_prev])
    res = residual(x)
    norm = float(np.linalg.norm(res))
    iters = 0
    halvings_total = 0
    converged = norm <= tol
    while not converged and iters < settings.max_iter:
        delta = spla.splu(jacobian(x)).solve(-res)
        t_ls = 1.0
        accepted = False
        for _ in range(settings.max_halvings + 1):
            trial = x + t_ls * delta
            try:
                res_trial = residual(trial)
            except StateError:
                t_ls *= 0.5
                halvings_total += 1
                continue
            norm_trial = float(np.linalg.norm(res_trial))
            if norm_trial < norm or norm_trial <= tol:
                x, res, norm = trial, res_trial, norm_trial
                accepted = True
                break
            t_ls *= 0.5
            halvings_total += 1
        iters += 1
        if not accepted:
            break
        converged = norm <= tol

    a2 = x[:n2_dim]
    e = x[n2_dim:]
    a1 = a1_of(a2)
    f = ops.K2.T @ a2
    stats = NewtonStats(converged=converged, iterations=iters,
                        residual_norm=norm, tolerance=tol, halvings=halvings_total)
    return StepResult(a1=a1, a2=a2, e=e, f=f, stats=stats)


# -- steady states ---------------------------------------------------------------


def solve_steady(ops: DiscreteOperators, bcs, u_time: float = 0.0,
                 initial_guess=None, settings: NewtonSettings | None = None,
                 homotopy_steps: int = 10):
    """Stationary solution matching the boundary data at the given time.

    With only flow-type conditions the density level is a gauge; the
    redundant last closure (the flow data must sum to zero) is replaced
    by a mean-density anchor taken from the initial guess.

    Plain Newton can fail structurally: at rest states the friction and
    kinetic terms have zero derivative, leaving loop and redistribution
    flows undetermined at linear order. Two fallbacks run in turn: a
    homotopy that ramps the boundary data from a constant-compatible
    value, and pseudo-transient continuation (implicit steps with frozen
    data and growing step size, finished by a Newton polish).

    Returns (a1, a2, e, f, info) with info describing which paths ran.
    """
    settings = settings or NewtonSettings()
    law = ops.law
    n2_dim = ops.n2

    all_flow = all(bc.kind == "flow" for bc in bcs)
    density_targets = [bc.signal(u_time) for bc in bcs
                       if bc.kind in ("density", "pressure_only_density")]
    if initial_guess is None:
        rho0 = float(np.mean(density_targets)) if density_targets else 1.0
        a1_g = _constant_density(ops, rho0)
        a2_g = np.zeros(n2_dim)
    else:
        a1_g, a2_g = initial_guess
        a1_g = np.asarray(a1_g, dtype=float).copy()
        a2_g = np.asarray(a2_g, dtype=float).copy()
    rho_anchor = ops.total_mass(a1_g) / _network_volume(ops)

    if all_flow:
        target_sum = sum(bc.signal(u_time) for bc in bcs)
        if abs(target_sum) > 1e-8 * (1.0 + max(abs(bc.signal(u_time)) for bc in bcs)):
            raise BuildError(
                f"steady state with only flow conditions needs balanced data; "
                f"flows sum to {target_sum:.6g}"
            )

    info = {"gauge_anchor": all_flow, "anchor_density": rho_anchor if all_flow else None,
            "homotopy_used": False, "pseudo_transient_used": False}
    u_target = lambda bc: bc.signal(u_time)  # noqa: E731
    result = _steady_newton(ops, bcs, law, u_target, a1_g, a2_g, all_flow,
                            rho_anchor, settings)
    if result is None:
        info["homotopy_used"] = True
        result = _steady_homotopy(ops, bcs, law, u_time, a1_g, a2_g, all_flow,
                                  rho_anchor, settings, homotopy_steps)
    if result is None:
        info["pseudo_transient_used"] = True
        result = _pseudo_transient(ops, bcs, law, u_target, a1_g, a2_g, all_flow,
                                   rho_anchor, settings)
    if result is None:
        raise StepFailure(u_time, "steady solve failed in all continuation paths")
    a1, a2, e = result
    f = ops.K2.T @ a2
    return a1, a2, e, f, info


def _steady_homotopy(ops, bcs, law, u_time, a1_g, a2_g, all_flow, rho_anchor,
                     settings, homotopy_steps):
    compat = {}
    for bc in bcs:
        if bc.kind == "flow":
            compat[bc.node_id] = 0.0
        elif bc.kind == "effort":
            compat[bc.node_id] = float(law.pressure.P_prime(rho_anchor))
        else:
            compat[bc.node_id] = rho_anchor
    a1, a2 = a1_g, a2_g
    result = None
    for s in range(1, homotopy_steps + 1):
        theta = s / homotopy_steps

        def u_of(bc, theta=theta):
            return (1.0 - theta) * compat[bc.node_id] + theta * bc.signal(u_time)

        result = _steady_newton(ops, bcs, law, u_of, a1, a2, all_flow,
                                rho_anchor, settings)
        if result is None:
            log.info("steady homotopy stalled at theta=%.2f", theta)
            return None
        a1, a2, _ = result
    return result


def _pseudo_transient(ops, bcs, law, u_of, a1, a2, all_flow, rho_anchor, settings,
                      max_steps: int = 400):
    """March the implicit scheme with frozen data until Newton polishing works."""

    class _Frozen:
        def __init__(self, bc):
            self.bc = bc
            self.value = u_of(bc)

        def __call__(self, t):
            return self.value

    frozen = tuple(
        BoundaryCondition(bc.node_id, bc.kind, _Frozen(bc), bc.area) for bc in bcs
    )
    # initial pseudo step from the fastest wave crossing one element
    h_min = min(sp_h for sp_h in (ops.sp.partition.h(e.id) for e in ops.sp.edges))
    rho_q, _ = ops.point_states(a1, a2, "pseudo-transient start")
    c_max = float(np.sqrt(np.max(law.pressure.p_prime(rho_q))))
    dt = 10.0 * h_min / max(c_max, 1e-12)
    e = effort_guess(ops, a1, a2)
    for k in range(max_steps):
        result = step(ops, frozen, a1, a2, e, 0.0, dt, settings)
        if result.stats.converged:
            a1, a2, e = result.a1, result.a2, result.e
            dt *= 1.5
            if k % 5 == 4:
                polished = _steady_newton(ops, bcs, law, u_of, a1, a2, all_flow,
                                          rho_anchor, settings)
                if polished is not None:
                    return polished
        else:
            dt *= 0.25
            if dt < 1e-12:
                return None
    return _steady_newton(ops, bcs, law, u_of, a1, a2, all_flow, rho_anchor, settings)


def _network_volume(ops) -> float:
    return sum(e.area * e.length for e in ops.topology.edges)


def _constant_density(ops, rho0: float) -> np.ndarray:
    """Coefficients of the constant density field rho0."""
    a1 = np.zeros(ops.n1)
    m1 = ops.sp.q + 1
    for e in ops.sp.edges:
        j = ops.sp.partition.counts[e.id]
        off = ops.sp.v1_offset[e.id]
        a1[off:off + j * m1:m1] = rho0
    return a1


def _steady_newton(ops, bcs, law, u_of, a1_start, a2_start, all_flow, rho_anchor,
                   settings):
    """Newton iteration on the stationary residual; None on failure."""
    n1, n2_dim, p = ops.n1, ops.n2, ops.n_ports
    vol = _network_volume(ops)
    tol = settings.effective_tol(n1 + n2_dim + p, float(np.max(np.abs(a1_start))))

    def closure(e, f):
        res = np.empty(p)
        de = np.empty(p)
        df = np.empty(p)
        for i, bc in enumerate(bcs):
            u = u_of(bc)
            if bc.kind == "flow":
                res[i], de[i], df[i] = f[i] - u, 0.0, 1.0
            elif bc.kind == "effort":
                res[i], de[i], df[i] = e[i] - u, 1.0, 0.0
            else:
                law.require_admissible(u, f"steady density value at {bc.node_id!r}")
                target = law.pressure.P_prime(u)
                if bc.kind == "density":
                    res[i] = e[i] - target - f[i] ** 2 / (2.0 * bc.area**2 * u**2)
                    de[i], df[i] = 1.0, -f[i] / (bc.area**2 * u**2)
                else:
                    res[i], de[i], df[i] = e[i] - target, 1.0, 0.0
        if all_flow:
            # replace the redundant last closure by the density anchor
            res[-1] = 0.0
            de[-1] = df[-1] = 0.0
        return res, de, df

    def residual(x):
        a1 = x[:n1]
        a2 = x[n1:n1 + n2_dim]
        e = x[n1 + n2_dim:]
        f1 = ops.J @ a2
        f2 = (assembly.c1_vec(ops, a1, a2) + ops.K2 @ e
              - assembly.friction_vec(ops, a1, a2))
        f = ops.K2.T @ a2
        f3, _, _ = closure(e, f)
        if all_flow:
            f3[-1] = ops.total_mass(a1) / vol - rho_anchor
        return np.concatenate([f1, f2, f3])

    def jacobian(x):
        a1 = x[:n1]
        a2 = x[n1:n1 + n2_dim]
        e = x[n1 + n2_dim:]
        c1_1, c1_2 = assembly.jacobian_c1(ops, a1, a2)
        if law.lam != 0.0:
            fr_1, fr_2 = assembly.jacobian_friction(ops, a1, a2)
            c1_1 = c1_1 - fr_1
            c1_2 = c1_2 - fr_2
        f = ops.K2.T @ a2
        _, de, df = closure(e, f)
        j31 = sparse.csr_matrix((p, n1))
        j32 = sparse.diags(df) @ ops.K2.T
        j3e = sparse.diags(de)
        mats = [
            [None, ops.J, None],
            [c1_1, c1_2, ops.K2],
            [j31, j32, j3e],
        ]
        jac = sparse.bmat(mats, format="lil")
        if all_flow:
            jac[n1 + n2_dim + p - 1, :] = 0.0
            jac[n1 + n2_dim + p - 1, :n1] = ops.mass_vec / vol
        return jac.tocsc()

    x = np.concatenate([a1_start, a2_start, np.zeros(p)])
    # start boundary efforts from the guessed state
    x[n1 + n2_dim:] = effort_guess(ops, a1_start, a2_start)
    try:
        res = residual(x)
    except StateError:
        return None
    norm = float(np.linalg.norm(res))
    for _ in range(settings.max_iter):
        if norm <= tol:
            return x[:n1], x[n1:n1 + n2_dim], x[n1 + n2_dim:]
        try:
            delta = spla.splu(jacobian(x)).solve(-res)
        except RuntimeError:
            return None
        t_ls = 1.0
        accepted = False
        for _ in range(settings.max_halvings + 1):
            trial = x + t_ls * delta
            try:
                res_trial = residual(trial)
            except StateError:
                t_ls *= 0.5
                continue
            norm_trial = float(np.linalg.norm(res_trial))
            if norm_trial < norm or norm_trial <= tol:
                x, res, norm = trial, res_trial, norm_trial
                accepted = True
                break
            t_ls *= 0.5
        if not accepted:
            return None
    if norm <= tol:
        return x[:n1], x[n1:n1 + n2_dim], x[n1 + n2_dim:]
    return None


# -- scenarios and trajectories -----------------------------------------------------


@dataclass
class OutputConfig:
    cadence: int = 1
    probes: tuple = ()            # ((edge_id, x), ...)
    out_dir: str | None = None


@dataclass
class Scenario:
    """Everything needed to run one simulation."""

    name: str
    topology: NetworkTopology
    law: object
    q: int = 0
    dx_max: float | None = None
    bcs: tuple = ()                       # BoundaryCondition per boundary node, port order
    initial: object = None                # ("fields", rho_tables, m_tables) or ("steady",)
    dt: float = 1.0
    t_end: float = 1.0
    quadrature_points: int | None = None
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        if not self.dt > 0:
            raise SchemaError("dt must be positive")
        k = self.t_end / self.dt
        if abs(k - round(k)) > 1e-9 * max(1.0, k):
            raise SchemaError("t_end must be an integer multiple of dt")
        bc_nodes = {bc.node_id for bc in self.bcs}
        missing = [n for n in self.topology.boundary_nodes if n not in bc_nodes]
        if missing:
            raise SchemaError(f"missing boundary condition for node(s) {missing}")
        extra = bc_nodes - set(self.topology.boundary_nodes)
        if extra:
            raise SchemaError(f"boundary condition for non-boundary node(s) {sorted(extra)}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def build(self):
        """Space pair and operators for this scenario."""
        partition = Partition.build(self.topology, dx_max=self.dx_max)
        sp = build_space_pair(self.topology, partition, self.q)
        ops = assemble_static(sp, self.topology, self.law,
                              quadrature_points=self.quadrature_points)
        for probe in self.output.probes:
            sp.locate(probe[0], np.array([probe[1]]))
        return sp, ops


@dataclass
class Trajectory:
    """Simulation output: decimated states, per-step records, probe data."""

    scenario: Scenario
    sp: object
    ops: DiscreteOperators
    times: list                 # decimated times, includes 0 and t_end
    states: list                # matching (a1, a2) pairs
    efforts: np.ndarray         # (K, p), every step
    flows: np.ndarray           # (K, p)
    records: list               # StepDiagnostics, every step
    probe_rows: list            # (t, values array (n_probes, 2)) at decimated times
    steady_info: dict | None = None
    spd_violation_steps: int = 0

    @property
    def final_state(self):
        return self.states[-1]

    def energy_loss(self) -> float:
        """Relative drop of the discrete energy over the run."""
        h0 = assembly.G_and_H(self.ops, *self.states[0])[1]
        h1 = assembly.G_and_H(self.ops, *self.final_state)[1]
        return 1.0 - h1 / h0


def project_initial_fields(sp, rho_tables: dict, m_tables: dict):
    """Project breakpoint tables onto the discrete pair.

    Density tables are L2-projected elementwise (exact for data that is
    polynomial per element); flux tables are interpolated at the nodal
    points, with the junction-eliminated coefficients implied by the
    remaining edges.
    """
    m1 = sp.q + 1
    npts = sp.q + 2
    xi, wref = np.polynomial.legendre.leggauss(npts)
    pvals = sp.v1_reference_values(xi)
    scale = (2.0 * np.arange(m1) + 1.0) / 2.0
    a1 = np.zeros(sp.n1)
    a2_full = np.zeros(sp.n2_full)
    m2 = sp.v2_degree
    for e in sp.edges:
        j = sp.partition.counts[e.id]
        h = sp.partition.h(e.id)
        rho_tab = np.asarray(rho_tables[e.id], dtype=float)
        m_tab = np.asarray(m_tables[e.id], dtype=float)
        k = np.arange(j)
        x_q = (k[:, None] * h + (xi[None, :] + 1.0) * h / 2.0)
        rho_q = np.interp(x_q.ravel(), rho_tab[:, 0], rho_tab[:, 1]).reshape(j, npts)
        coeffs = rho_q @ (wref[:, None] * pvals) * scale[None, :]
        off = sp.v1_offset[e.id]
        a1[off:off + j * m1] = coeffs.ravel()
        # nodal interpolation for the flux
        nodes = (sp.v2_nodes + 1.0) / 2.0
        x_n = np.concatenate([(k[:, None] * h + nodes[None, :-1] * h).ravel(),
                              [e.length]])
        off2 = sp.v2_full_offset[e.id]
        a2_full[off2:off2 + j * m2 + 1] = np.interp(x_n, m_tab[:, 0], m_tab[:, 1])
    a2 = a2_full[sp.kept_dofs]
    return a1, a2


def initial_state(scenario: Scenario, ops: DiscreteOperators):
    """Initial coefficients from tables or from the stationary problem."""
    kind = scenario.initial[0]
    if kind == "fields":
        _, rho_tables, m_tables = scenario.initial
        a1, a2 = project_initial_fields(ops.sp, rho_tables, m_tables)
        return a1, a2, None
    if kind == "steady":
        a1, a2, _, _, info = solve_steady(ops, scenario.bcs, u_time=0.0,
                                          settings=scenario.newton)
        return a1, a2, info
    raise SchemaError(f"unknown initial condition type {kind!r}")


def simulate(scenario: Scenario, progress: bool = False) -> Trajectory:
    """Run the implicit Euler scheme over the scenario horizon.

    Diagnostics are recorded at every step; states and probe values are
    stored at the output cadence (plus the initial and final step). Step
    failures abort with the failing time.
    """
    sp, ops = scenario.build()
    a1, a2, steady_info = initial_state(scenario, ops)
    e = effort_guess(ops, a1, a2)
    cadence = max(1, scenario.output.cadence)
    probes = list(scenario.output.probes)

    def probe_values(a1v, a2v):
        from .femspace import evaluate

        return evaluate(sp, (a1v, a2v), probes) if probes else np.zeros((0, 2))

    times = [0.0]
    states = [(a1.copy(), a2.copy())]
    probe_rows = [(0.0, probe_values(a1, a2))]
    k_steps = scenario.n_steps
    efforts = np.zeros((k_steps, ops.n_ports))
    flows = np.zeros((k_steps, ops.n_ports))
    records = []
    spd_violations = 0

    for k in range(1, k_steps + 1):
        t_k = k * scenario.dt
        result = step(ops, scenario.bcs, a1, a2, e, t_k, scenario.dt, scenario.newton)
        if not result.stats.converged:
            raise StepFailure(
                t_k,
                f"Newton did not converge ({result.stats.iterations} iterations, "
                f"residual {result.stats.residual_norm:.3g} > {result.stats.tolerance:.3g})",
                stats=result.stats,
            )
        rec = diagnostics.record(ops, (a1, a2), (result.a1, result.a2),
                                 result.e, result.f, scenario.dt, t_k=t_k,
                                 newton_iters=result.stats.iterations,
                                 newton_tol=result.stats.tolerance)
        records.append(rec)
        a1, a2, e = result.a1, result.a2, result.e
        efforts[k - 1] = result.e
        flows[k - 1] = result.f
        rho_q, m_q = ops.point_states(a1, a2, "spd monitor")
        if np.any(ops.law.spd_margin(rho_q, m_q) <= 0.0):
            spd_violations += 1
        if k % cadence == 0 or k == k_steps:
            times.append(t_k)
            states.append((a1.copy(), a2.copy()))
            probe_rows.append((t_k, probe_values(a1, a2)))
        if progress and (k % max(1, k_steps // 20) == 0):
            log.info("t=%.6g (%d/%d), newton %d", t_k, k, k_steps, result.stats.iterations)

    if spd_violations:
        log.warning(
            "energy Hessian lost positive definiteness at quadrature points "
            "in %d of %d steps", spd_violations, k_steps,
        )
    return Trajectory(scenario=scenario, sp=sp, ops=ops, times=times, states=states,
                      efforts=efforts, flows=flows, records=records,
                      probe_rows=probe_rows, steady_info=steady_info,
                      spd_violation_steps=spd_violations)
