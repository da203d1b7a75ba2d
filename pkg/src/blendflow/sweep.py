"""Parameter sweeps over repeated solves, with regime-transition detection.

A sweep varies one scalar parameter (an optimized-demand cap, a junction's
minimum hydrogen fraction, or a consumer's carbon offset price) over an
inclusive grid, solves every instance (warm-started from the previous point
by default) and records a summary row per point.  Regime transitions are
reported at midpoints between consecutive points whose sets of active
inequality constraints differ.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import GasConstants
from .network import GNodeKind, Network
from .nlp import VK_ALPHA, VK_D, VK_GAMMA_NODE, assemble
from .scaling import ScalingConfig, default_scaling
from .solver import Solution, SolverOptions, SolverStatus, solve

TARGETS = ("demand_max", "gamma_min", "carbon_price")


@dataclass(frozen=True)
class SweepSpec:
    network: Network
    target: str                     # one of TARGETS
    element_ids: tuple               # gNode ids (demand_max, carbon_price) or junctions
    start: float
    stop: float
    step: float
    gc: GasConstants | None = None
    scaling: ScalingConfig | None = None
    options: SolverOptions = field(default_factory=SolverOptions)
    warm_start: bool = True

    def validate(self):
        if self.target not in TARGETS:
            raise ValueError(f"unknown sweep target {self.target!r}")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.start > self.stop:
            raise ValueError("start must not exceed stop")
        if not self.element_ids:
            raise ValueError("sweep needs at least one element id")
        for eid in self.element_ids:
            if self.target == "gamma_min":
                if eid not in self.network.junctions:
                    raise ValueError(f"unknown junction {eid!r}")
            else:
                gn = self.network.gnodes.get(eid)
                if gn is None:
                    raise ValueError(f"unknown gNode {eid!r}")
                if self.target == "demand_max" and gn.kind != GNodeKind.DEMAND_OPTIMIZED:
                    raise ValueError(f"{eid} is not an optimized demand gNode")
                if self.target == "carbon_price" and not gn.kind.is_demand:
                    raise ValueError(f"{eid} is not a demand gNode")

    def grid(self) -> list[float]:
        """Inclusive grid; a step mismatch truncates at stop."""
        values = []
        k = 0
        while True:
            v = self.start + k * self.step
            if v > self.stop + 1e-9 * max(1.0, abs(self.stop)):
                break
            values.append(min(v, self.stop))
            k += 1
        return values

    def apply(self, value: float) -> Network:
        net = self.network
        for eid in self.element_ids:
            if self.target == "demand_max":
                net = net.with_gnode(eid, g_max=value)
            elif self.target == "carbon_price":
                net = net.with_gnode(eid, carbon_price=value)
            else:
                net = net.with_junction(eid, gamma_min=value)
        return net


@dataclass
class SweepRow:
    value: float
    status: str
    objective: float
    delivered_energy: dict     # demand gNode -> MJ/s
    withdrawal: dict           # demand gNode -> kg/s
    gamma: dict                # demand gNode -> hydrogen fraction at its junction
    alpha: dict                # compressor -> boost ratio
    shadow_ng: dict            # demand gNode -> $/kg at its junction
    shadow_h2: dict
    shadow_blend: dict
    binding_set: tuple
    iterations: int


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list
    transitions: list          # parameter midpoints where the active set changed

    @property
    def values(self) -> list[float]:
        return [r.value for r in self.rows]


def _summarize(value: float, network: Network, solution: Solution) -> SweepRow:
    gc = network.gas_constants
    demands = network.gnodes_of_kind(GNodeKind.DEMAND_OPTIMIZED, GNodeKind.DEMAND_FIXED)
    delivered, withdrawal, gamma = {}, {}, {}
    sng, sh2, sbl = {}, {}, {}
    for gid in demands:
        jid = network.gnodes[gid].junction
        d = solution.primal[(VK_D, gid)]
        g = solution.primal[(VK_GAMMA_NODE, jid)]
        withdrawal[gid] = d
        gamma[gid] = g
        delivered[gid] = d * (gc.r_ng + g * (gc.r_h2 - gc.r_ng))
        sng[gid] = solution.shadow_price_ng[jid]
        sh2[gid] = solution.shadow_price_h2[jid]
        sbl[gid] = solution.shadow_price_blend[jid]
    alpha = {c: solution.primal[(VK_ALPHA, c)] for c in network.compressor_ids}
    return SweepRow(value=value, status=solution.status.value,
                    objective=solution.objective, delivered_energy=delivered,
                    withdrawal=withdrawal, gamma=gamma, alpha=alpha,
                    shadow_ng=sng, shadow_h2=sh2, shadow_blend=sbl,
                    binding_set=tuple(solution.binding_set),
                    iterations=solution.iterations)


def _solve_point(args):
    spec, value = args
    network = spec.apply(value)
    problem = assemble(network, spec.gc, spec.scaling or default_scaling(network))
    solution = solve(problem, spec.options)
    return _summarize(value, network, solution)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Solve every grid point and collect summaries.

    Warm-started sweeps run sequentially by definition; with
    ``warm_start=False`` and ``jobs > 1`` the points solve concurrently.
    Non-optimal points are recorded, not fatal.
    """
    spec.validate()
    values = spec.grid()
    scaling = spec.scaling or default_scaling(spec.network, spec.gc)
    rows: list[SweepRow] = []
    if spec.warm_start or jobs <= 1:
        warm = None
        for v in values:
            network = spec.apply(v)
            problem = assemble(network, spec.gc, scaling)
            solution = solve(problem, spec.options,
                             warm_start=warm if spec.warm_start else None)
            if solution.status == SolverStatus.OPTIMAL:
                warm = solution
            rows.append(_summarize(v, network, solution))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_solve_point, [(spec, v) for v in values]))
    return SweepResult(spec=spec, rows=rows, transitions=detect_transitions(rows))


def detect_transitions(rows: list) -> list:
    """Midpoints between consecutive optimal rows whose active sets differ."""
    if not rows:
        raise ValueError("no rows")
    transitions = []
    prev = None
    for row in rows:
        if row.status != SolverStatus.OPTIMAL.value:
            continue
        if prev is not None and tuple(sorted(row.binding_set)) != tuple(sorted(prev.binding_set)):
            transitions.append(0.5 * (prev.value + row.value))
        prev = row
    return transitions


# -- export -------------------------------------------------------------------

def _columns(result: SweepResult) -> list[str]:
    network = result.spec.network
    demands = network.gnodes_of_kind(GNodeKind.DEMAND_OPTIMIZED, GNodeKind.DEMAND_FIXED)
    cols = ["value", "status", "objective"]
    for gid in demands:
        cols += [f"energy_{gid}", f"flow_{gid}", f"gamma_{gid}",
                 f"shadow_price_ng_{gid}", f"shadow_price_h2_{gid}",
                 f"shadow_price_blend_{gid}"]
    cols += [f"alpha_{cid}" for cid in network.compressor_ids]
    cols += ["iterations", "binding_set"]
    return cols


def _row_cells(result: SweepResult, row: SweepRow) -> list[str]:
    network = result.spec.network
    demands = network.gnodes_of_kind(GNodeKind.DEMAND_OPTIMIZED, GNodeKind.DEMAND_FIXED)

    def num(x: float) -> str:
        return format(float(x), ".17e")

    cells = [num(row.value), row.status, num(row.objective)]
    for gid in demands:
        cells += [num(row.delivered_energy[gid]), num(row.withdrawal[gid]),
                  num(row.gamma[gid]), num(row.shadow_ng[gid]),
                  num(row.shadow_h2[gid]), num(row.shadow_blend[gid])]
    cells += [num(row.alpha[cid]) for cid in network.compressor_ids]
    cells += [str(row.iterations), ";".join(row.binding_set)]
    return cells


def export_csv(result: SweepResult, path) -> None:
    """One header line plus one line per grid point, full-precision floats."""
    lines = [",".join(_columns(result))]
    for row in result.rows:
        lines.append(",".join(_row_cells(result, row)))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def export_json(result: SweepResult, path) -> None:
    """Same content as the CSV plus the detected transitions."""
    cols = _columns(result)
    doc = {
        "target": result.spec.target,
        "elements": list(result.spec.element_ids),
        "rows": [dict(zip(cols, _row_cells(result, row))) for row in result.rows],
        "transitions": [float(t) for t in result.transitions],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
