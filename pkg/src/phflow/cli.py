"""Command-line interface.

Subcommands: simulate, steady, check, convergence, benchmark. Usage
errors exit with code 2 (argparse default); numerical failures exit
with code 1 and report the failing time.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import assembly, diagnostics
from .errors import PhflowError, StepFailure
from .femspace import check_compatibility
from .scenario_io import (
    BENCHMARKS,
    load_scenario,
    run_metadata,
    write_benchmark,
    write_run_outputs,
    write_state_csv,
)
from .timestepper import simulate, solve_steady


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    out_dir = args.out or scenario.output.out_dir or "out"
    try:
        traj = simulate(scenario, progress=args.verbose)
    except StepFailure as exc:
        print(f"simulation failed at t={exc.t}: {exc}", file=sys.stderr)
        return 1
    paths = write_run_outputs(traj, out_dir)
    print(f"wrote {paths['diagnostics']}")
    print(f"steps: {len(traj.records)}, energy loss: {_fmt(traj.energy_loss())}")
    worst_slack = min(r.dissipation_slack for r in traj.records)
    print(f"min dissipation slack: {_fmt(worst_slack)}")
    return 0


def cmd_steady(args) -> int:
    scenario = load_scenario(args.scenario)
    _, ops = scenario.build()
    try:
        a1, a2, e, f, info = solve_steady(ops, scenario.bcs, u_time=0.0,
                                          settings=scenario.newton)
    except PhflowError as exc:
        print(f"steady solve failed: {exc}", file=sys.stderr)
        return 1
    out_dir = args.out or scenario.output.out_dir or "out"
    os.makedirs(out_dir, exist_ok=True)
    path = write_state_csv((ops.sp, (a1, a2)), out_dir, name="steady_state.csv")
    meta = run_metadata(scenario)
    meta["steady_info"] = info
    meta["boundary_efforts"] = [float(x) for x in e]
    meta["boundary_flows"] = [float(x) for x in f]
    meta_path = os.path.join(out_dir, "steady_metadata.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")
    for node, e_i, f_i in zip(scenario.topology.boundary_nodes, e, f):
        print(f"  {node}: effort={_fmt(float(e_i))} flow={_fmt(float(f_i))}")
    if info["homotopy_used"]:
        print("  (homotopy fallback was used)")
    if info["pseudo_transient_used"]:
        print("  (pseudo-transient continuation was used)")
    if info["gauge_anchor"]:
        print(f"  (density gauge anchored at {_fmt(info['anchor_density'])})")
    return 0


def cmd_check(args) -> int:
    scenario = load_scenario(args.scenario)
    sp, ops = scenario.build()
    rng = np.random.default_rng(20240501)
    failures = []

    def report(name, ok, detail=""):
        print(f"  [{'ok' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
        if not ok:
            failures.append(name)

    comp = check_compatibility(sp)
    report("derivative map onto density space", comp["a1_surjective"],
           f"rank {comp['a1_rank']} of {comp['n1']}")
    report("constant fields contained in flux space", comp["a2_kernel_included"],
           f"max residual {comp['a2_max_residual']:.3g}")

    for name, mat in (("density mass matrix", np.diag(ops.M1_diag)),
                      ("flux mass matrix", ops.M2.toarray())):
        try:
            np.linalg.cholesky(mat)
            report(f"{name} positive definite", True)
        except np.linalg.LinAlgError:
            report(f"{name} positive definite", False)

    import scipy.sparse as sparse

    block = sparse.bmat([[None, ops.J], [-ops.J.T, None]])
    skew = abs(block + block.T).max() if block.nnz else 0.0
    report("paired convection block exactly skew", skew == 0.0)

    qrep = assembly.quadrature_report(ops)
    report("reduced Gram matrices positive definite",
           qrep["v1_gram_spd"] and qrep["v2_gram_spd"],
           f"cond v1 {qrep['v1_gram_cond']:.3g}, v2 {qrep['v2_gram_cond']:.3g}")

    # randomized physics checks at admissible states
    law = ops.law
    (rho_lo, rho_hi), (m_lo, m_hi) = law.pressure.sampling_box
    rho_s = rng.uniform(rho_lo, rho_hi, 100)
    m_s = rng.uniform(m_lo, m_hi, 100)
    z = law.z_hat(rho_s, m_s)
    back = law.a_hat(*z)
    report("variable transform roundtrip", np.allclose(back[1], m_s, rtol=1e-12, atol=1e-12))
    dual = law.h(*z) - (law.grad_g(rho_s, m_s)[1] * m_s - law.g(rho_s, m_s))
    denom = 1.0 + np.abs(law.h(*z))
    report("conjugacy identity", float(np.max(np.abs(dual) / denom)) < 1e-12)

    d1, _ = law.grad_g(rho_s, m_s)
    step_fd = 1e-6 * np.maximum(1.0, np.abs(rho_s))
    fd = (law.g(rho_s + step_fd, m_s) - law.g(rho_s - step_fd, m_s)) / (2 * step_fd)
    rel = np.max(np.abs(fd - d1) / (1.0 + np.abs(d1)))
    report("conjugate gradient vs finite differences", rel < 1e-6, f"max rel {rel:.3g}")

    ok_jac, detail = _jacobian_fd_check(ops, rng)
    report("assembled Jacobians vs finite differences", ok_jac, detail)

    psd_ok = True
    for _ in range(10):
        a1r, a2r = _random_state(ops, rng)
        w = rng.standard_normal(ops.n2)
        if float(w @ assembly.R_apply(ops, a1r, a2r, w)) < -1e-12:
            psd_ok = False
    report("friction operator positive semidefinite", psd_ok)

    if failures:
        print(f"{len(failures)} check(s) failed")
        return 1
    print("all checks passed")
    return 0


def _random_state(ops, rng):
    """Admissible random coefficients; higher density modes stay small."""
    (rho_lo, rho_hi), (m_lo, m_hi) = ops.law.pressure.sampling_box
    m1 = ops.sp.q + 1
    n_cells = ops.n1 // m1
    a1 = np.zeros(ops.n1)
    a1[::m1] = rng.uniform(0.7 * rho_lo + 0.3 * rho_hi,
                           0.3 * rho_lo + 0.7 * rho_hi, n_cells)
    higher = np.tile(np.arange(m1) != 0, n_cells)
    a1[higher] = 0.01 * (rho_hi - rho_lo) * rng.standard_normal(int(higher.sum()))
    a2 = 0.05 * (m_hi - m_lo) * rng.standard_normal(ops.n2)
    return a1, a2


def _jacobian_fd_check(ops, rng, tol=1e-5):
    a1, a2 = _random_state(ops, rng)
    worst = 0.0
    for func, jac in ((assembly.n2_vec, assembly.jacobian_n2),
                      (assembly.c1_vec, assembly.jacobian_c1)):
        j1, j2 = jac(ops, a1, a2)
        base1 = np.abs(j1).max() + 1.0
        base2 = np.abs(j2).max() + 1.0
        for idx in rng.choice(ops.n1, size=min(5, ops.n1), replace=False):
            h = 1e-6 * (1.0 + abs(a1[idx]))
            ap = a1.copy(); ap[idx] += h
            am = a1.copy(); am[idx] -= h
            fd = (func(ops, ap, a2) - func(ops, am, a2)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(fd - j1[:, idx].toarray().ravel()))) / base1)
        for idx in rng.choice(ops.n2, size=min(5, ops.n2), replace=False):
            # both forms are at most quadratic in the flux coefficients, so
            # a large central-difference step is exact and cancellation-free
            h = 0.5 * (1.0 + abs(a2[idx]))
            ap = a2.copy(); ap[idx] += h
            am = a2.copy(); am[idx] -= h
            fd = (func(ops, a1, ap) - func(ops, a1, am)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(fd - j2[:, idx].toarray().ravel()))) / base2)
    return worst < tol, f"max rel deviation {worst:.3g}"


def cmd_convergence(args) -> int:
    scenario = load_scenario(args.scenario)
    dxs = [float(v) for v in args.dx.split(",")]
    parts = args.subdomain.split(":")
    if len(parts) != 4 or parts[0] != "edge":
        print("subdomain must look like edge:<id>:<x0>:<x1>", file=sys.stderr)
        return 2
    subdomain = (parts[1], float(parts[2]), float(parts[3]))

    import dataclasses

    def run(dx):
        sc = dataclasses.replace(scenario, dx_max=dx,
                                 output=dataclasses.replace(scenario.output, cadence=10**9))
        return simulate(sc)

    try:
        ref = run(args.ref_dx)
        errors = []
        for dx in dxs:
            traj = run(dx)
            err = diagnostics.l2_error(
                traj.sp, traj.final_state,
                (ref.sp, ref.final_state), subdomain, field=args.field,
            )
            errors.append((dx, err))
            print(f"  dx={dx:g}  error={_fmt(err)}")
    except StepFailure as exc:
        print(f"convergence run failed at t={exc.t}: {exc}", file=sys.stderr)
        return 1
    order = diagnostics.convergence_order(errors)
    print(f"estimated order: {order:.3f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "convergence.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("dx,error\n")
            for dx, err in errors:
                fh.write(f"{_fmt(dx)},{_fmt(err)}\n")
            fh.write(f"# estimated_order,{_fmt(order)}\n")
        print(f"wrote {path}")
    return 0


def cmd_benchmark(args) -> int:
    path = write_benchmark(args.name, args.out)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phflow",
        description="Structure-preserving network flow simulation",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write CSV outputs")
    p.add_argument("scenario")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("steady", help="solve the stationary problem at t=0")
    p.add_argument("scenario")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("check", help="run the structural invariant suite")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("convergence", help="grid refinement study against a fine reference")
    p.add_argument("scenario")
    p.add_argument("--dx", required=True, help="comma-separated element sizes")
    p.add_argument("--ref-dx", type=float, required=True, dest="ref_dx")
    p.add_argument("--subdomain", required=True, help="edge:<id>:<x0>:<x1>")
    p.add_argument("--field", default="rho", choices=["rho", "m"])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("benchmark", help="write a built-in scenario file")
    p.add_argument("name", choices=sorted(BENCHMARKS))
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PhflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
