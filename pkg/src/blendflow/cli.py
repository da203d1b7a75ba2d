"""Command-line interface: validate, simulate, solve and sweep.

Exit codes: 0 on success, 1 on domain failures (validation errors,
non-convergence, non-optimal solves), 2 on usage or file-parse errors.
Every failure prints a single JSON error record to stderr with keys
``code``, ``message`` and ``element``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

import yaml

from .network import (GNodeKind, NetworkParseError, NetworkValidationError,
                      load_network)
from .nlp import (VK_ALPHA, VK_D, VK_GAMMA_EDGE, VK_GAMMA_NODE, VK_PHI,
                  VK_PRESSURE, VK_S_H2, VK_S_NG, assemble)
from .scaling import default_scaling
from .simulate import ControlAssignment, SimulationError, crosscheck, simulate
from .solver import SolverOptions, SolverStatus, solve
from .sweep import SweepSpec, export_csv, export_json, run_sweep

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def _fail(code: str, message: str, element: str = "", exit_code: int = EXIT_DOMAIN) -> int:
    sys.stderr.write(json.dumps(
        {"code": code, "message": message, "element": element}) + "\n")
    return exit_code


def _solver_options(args, network) -> SolverOptions:
    overrides = dict(network.solver_overrides)
    if args.tol is not None:
        overrides["kkt_tolerance"] = args.tol
    if args.seed_count is not None:
        overrides["seed_count"] = args.seed_count
    fields = {f.name for f in dataclasses.fields(SolverOptions)}
    unknown = set(overrides) - fields
    if unknown:
        raise NetworkParseError(f"unknown solver options {sorted(unknown)}")
    return SolverOptions(**{k: (int(v) if k in ("max_iterations", "seed_count")
                                else float(v))
                            for k, v in overrides.items()})


def _write_output(text: str, args) -> None:
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_validate(args) -> int:
    network = load_network(args.network)
    print(f"{args.network}: ok")
    print(f"  junctions   {len(network.junctions):3d}   "
          f"slack {','.join(network.slack_junction_ids)}")
    print(f"  pipes       {len(network.pipes):3d}")
    print(f"  compressors {len(network.compressors):3d}")
    print(f"  gnodes      {len(network.gnodes):3d}")
    return EXIT_OK


def _parse_controls(args, network) -> ControlAssignment:
    doc = {"s_ng": {}, "s_h2": {}, "d": {}, "alpha": {}}
    if args.controls:
        try:
            with open(args.controls) as fh:
                loaded = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise NetworkParseError(f"cannot read controls: {exc}") from exc
        if not isinstance(loaded, dict) or set(loaded) - set(doc):
            raise NetworkParseError("controls file needs sections among "
                                    "s_ng, s_h2, d, alpha")
        for key, mapping in loaded.items():
            doc[key].update({str(k): float(v) for k, v in (mapping or {}).items()})
    for item in args.set or []:
        try:
            target, value = item.split("=", 1)
            kind, cid = target.split(":", 1)
            doc[kind][cid] = float(value)
        except (ValueError, KeyError):
            raise NetworkParseError(f"bad --set {item!r}; expected kind:id=value")
    return ControlAssignment(s_ng=doc["s_ng"], s_h2=doc["s_h2"],
                             d=doc["d"], alpha=doc["alpha"])


def _cmd_simulate(args) -> int:
    network = load_network(args.network)
    controls = _parse_controls(args, network)
    state = simulate(network, controls)
    if args.format == "json":
        text = json.dumps({
            "pressures": state.pressures, "gamma_node": state.gamma_node,
            "flows": state.flows, "gamma_edge": state.gamma_edge,
            "makeup": state.makeup, "residual_norm": state.residual_norm,
        }, indent=2, sort_keys=True) + "\n"
    else:
        lines = ["element,kind,pressure_pa,gamma,flow_kg_s"]
        for j in network.junction_ids:
            lines.append(f"{j},junction,{state.pressures[j]:.17e},"
                         f"{state.gamma_node[j]:.17e},")
        for e in network.edge_ids:
            kind = "pipe" if e in network.pipes else "compressor"
            lines.append(f"{e},{kind},,{state.gamma_edge[e]:.17e},"
                         f"{state.flows[e]:.17e}")
        for s, w in state.makeup.items():
            lines.append(f"{s},slack_makeup,,,{w:.17e}")
        text = "\n".join(lines) + "\n"
    _write_output(text, args)
    return EXIT_OK


def _solution_document(network, problem, solution) -> dict:
    by_kind: dict[str, dict] = {}
    for (kind, cid), value in solution.primal.items():
        by_kind.setdefault(kind, {})[cid] = value
    return {
        "status": solution.status.value,
        "objective_usd_per_s": solution.objective,
        "iterations": solution.iterations,
        "kkt_residual": solution.kkt_residual,
        "primal": by_kind,
        "shadow_price_ng": solution.shadow_price_ng,
        "shadow_price_h2": solution.shadow_price_h2,
        "shadow_price_blend": solution.shadow_price_blend,
        "binding_set": list(solution.binding_set),
    }


def _cmd_solve(args) -> int:
    network = load_network(args.network)
    options = _solver_options(args, network)
    problem = assemble(network)
    solution = solve(problem, options)
    doc = _solution_document(network, problem, solution)

    # human-readable summary on stdout
    print(f"status      {solution.status.value}")
    print(f"objective   {solution.objective:.6f} $/s")
    print(f"iterations  {solution.iterations}")
    gc = network.gas_constants
    print("gNode allocations:")
    for gid in network.gnodes_of_kind(GNodeKind.NG_SUPPLY):
        print(f"  {gid:>6}  NG supply  {solution.primal[(VK_S_NG, gid)]:10.4f} kg/s")
    for gid in network.gnodes_of_kind(GNodeKind.H2_SUPPLY):
        print(f"  {gid:>6}  H2 supply  {solution.primal[(VK_S_H2, gid)]:10.4f} kg/s")
    for gid in network.gnodes_of_kind(GNodeKind.DEMAND_OPTIMIZED, GNodeKind.DEMAND_FIXED):
        jid = network.gnodes[gid].junction
        d = solution.primal[(VK_D, gid)]
        g = solution.primal[(VK_GAMMA_NODE, jid)]
        energy = d * (gc.r_ng + g * (gc.r_h2 - gc.r_ng))
        print(f"  {gid:>6}  delivery   {d:10.4f} kg/s  {energy:9.3f} MJ/s  "
              f"gamma {g:.4f}")
    print("shadow prices [$ / kg] (NG / H2 / blend):")
    for jid in network.junction_ids:
        print(f"  {jid:>6}  {solution.shadow_price_ng[jid]:9.5f}  "
              f"{solution.shadow_price_h2[jid]:9.5f}  "
              f"{solution.shadow_price_blend[jid]:9.5f}")
    if solution.binding_set:
        print("binding: " + ", ".join(solution.binding_set))

    if args.output:
        if args.format == "csv":
            lines = ["kind,id,value"]
            for (kind, cid), value in sorted(solution.primal.items()):
                lines.append(f"{kind},{cid},{value:.17e}")
            text = "\n".join(lines) + "\n"
        else:
            text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        with open(args.output, "w", newline="") as fh:
            fh.write(text)

    if solution.status != SolverStatus.OPTIMAL:
        return _fail("solver", f"solve finished with status {solution.status.value}",
                     element=args.network)
    if args.crosscheck:
        report = crosscheck(solution, network)
        print(f"crosscheck  max deviation {report.max_deviation:.3e} "
              f"({report.worst}) {'pass' if report.passed else 'FAIL'}")
        if not report.passed:
            return _fail("crosscheck", "simulation cross-check failed",
                         element=report.worst)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    network = load_network(args.network)
    options = _solver_options(args, network)
    try:
        kind, ids = args.target.split(":", 1)
        element_ids = tuple(ids.split(","))
        start_s, stop_s, step_s = args.range.split(":")
    except ValueError:
        raise NetworkParseError(
            "expected --target kind:ID[,ID...] and --range start:stop:step")
    spec = SweepSpec(network=network, target=kind, element_ids=element_ids,
                     start=float(start_s), stop=float(stop_s),
                     step=float(step_s), options=options,
                     warm_start=not args.no_warm_start)
    try:
        spec.validate()
    except ValueError as exc:
        raise NetworkParseError(str(exc))
    result = run_sweep(spec, jobs=args.jobs)
    import os
    import tempfile
    if args.output:
        path = args.output
        (export_json if args.format == "json" else export_csv)(result, path)
    else:
        fd, path = tempfile.mkstemp(suffix=f".{args.format}")
        os.close(fd)
        (export_json if args.format == "json" else export_csv)(result, path)
        with open(path) as fh:
            sys.stdout.write(fh.read())
        os.unlink(path)
    bad = [r for r in result.rows if r.status != SolverStatus.OPTIMAL.value]
    if bad:
        return _fail("sweep", f"{len(bad)} of {len(result.rows)} points "
                     "did not reach optimality", element=str(bad[0].value))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blendflow",
        description="Steady-state optimization of hydrogen/natural-gas "
                    "blend transport in pipeline networks.")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("network", help="network description file (YAML)")
        p.add_argument("--output", help="write results to this path")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--tol", type=float, default=None,
                       help="solver KKT tolerance")
        p.add_argument("--seed-count", type=int, default=None,
                       help="multi-start size")
        p.add_argument("--jobs", type=int, default=1,
                       help="concurrent solves (cold-started sweeps only)")

    common(sub.add_parser("validate", help="load and validate a network file"))
    p_sim = sub.add_parser("simulate", help="steady state at fixed controls")
    common(p_sim)
    p_sim.add_argument("--controls", help="YAML file with s_ng/s_h2/d/alpha")
    p_sim.add_argument("--set", action="append", metavar="KIND:ID=VALUE",
                       help="override one control, e.g. alpha:C1=1.2")
    p_solve = sub.add_parser("solve", help="economic allocation optimization")
    common(p_solve)
    p_solve.add_argument("--crosscheck", action="store_true",
                         help="re-simulate the optimal controls and compare")
    p_sweep = sub.add_parser("sweep", help="parameter sensitivity sweep")
    common(p_sweep)
    p_sweep.add_argument("--target", required=True,
                         help="demand_max:ID[,ID] | gamma_min:J | carbon_price:ID")
    p_sweep.add_argument("--range", required=True, help="start:stop:step")
    p_sweep.add_argument("--no-warm-start", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()),
                        format="%(name)s %(levelname)s %(message)s")
    handlers = {"validate": _cmd_validate, "simulate": _cmd_simulate,
                "solve": _cmd_solve, "sweep": _cmd_sweep}
    try:
        return handlers[args.command](args)
    except NetworkParseError as exc:
        return _fail("parse", str(exc), element=args.network, exit_code=EXIT_USAGE)
    except NetworkValidationError as exc:
        return _fail("validation", str(exc), element=exc.element)
    except SimulationError as exc:
        return _fail("simulation", str(exc))
    except FileNotFoundError as exc:
        return _fail("parse", str(exc), exit_code=EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
