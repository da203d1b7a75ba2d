"""Steady-state network simulation with fixed controls.

Given supplies, withdrawals and compressor ratios, this solves the square
physical system (mass balances, pipe pressure drop, boost relations, slack
pressures) by damped Newton iteration.  Unknowns are squared scaled
pressures, junction hydrogen fractions, edge flows and one makeup flow per
slack junction; working in squared pressure keeps the pipe rows polynomial.

Fixed controls generally do not balance mass exactly, so each slack
junction absorbs (or supplies) the residual at its own composition; the
absorbed rate is reported as ``makeup``.  The reported state satisfies
``sum(injections) - sum(withdrawals) - sum(makeup) = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import GasConstants
from .network import GNodeKind, Network
from .scaling import ScalingConfig, default_scaling

_Q_FLOOR = 1e-12


class SimulationError(Exception):
    pass


class NonConvergence(SimulationError):
    """Newton iteration failed to reduce the residual to tolerance."""


class NegativePressure(SimulationError):
    """An iterate left the positive squared-pressure domain."""


@dataclass(frozen=True)
class ControlAssignment:
    """Fixed operating point: supplies and withdrawals [kg/s], boost ratios."""

    s_ng: dict = field(default_factory=dict)    # gNode id -> kg/s
    s_h2: dict = field(default_factory=dict)
    d: dict = field(default_factory=dict)
    alpha: dict = field(default_factory=dict)   # compressor id -> ratio >= 1

    def validate(self, network: Network):
        for name, mapping in (("s_ng", self.s_ng), ("s_h2", self.s_h2), ("d", self.d)):
            for gid, value in mapping.items():
                if gid not in network.gnodes:
                    raise SimulationError(f"{name}: unknown gNode {gid!r}")
                if value < 0.0:
                    raise SimulationError(f"{name}[{gid}] negative")
        for cid, value in self.alpha.items():
            if cid not in network.compressors:
                raise SimulationError(f"alpha: unknown compressor {cid!r}")
            if value < 1.0:
                raise SimulationError(f"alpha[{cid}] below 1")


@dataclass
class SimulationState:
    pressures: dict           # junction -> Pa
    gamma_node: dict          # junction -> hydrogen mass fraction
    flows: dict               # edge -> kg/s
    gamma_edge: dict          # edge -> hydrogen mass fraction carried
    makeup: dict              # slack junction -> kg/s absorbed
    residual_norm: float
    iterations: int

    def total_injection(self, controls: ControlAssignment) -> float:
        return sum(controls.s_ng.values()) + sum(controls.s_h2.values())

    def total_withdrawal(self, controls: ControlAssignment) -> float:
        return sum(controls.d.values())


def simulate(network: Network, controls: ControlAssignment,
             gc: GasConstants | None = None,
             scaling: ScalingConfig | None = None,
             tol: float = 1e-12, max_iterations: int = 80) -> SimulationState:
    """Solve the steady-state physical system for the given controls."""
    gc = gc or network.gas_constants
    scaling = scaling or default_scaling(network, gc)
    controls.validate(network)

    junctions = network.junction_ids
    edges = network.edge_ids
    slacks = network.slack_junction_ids
    nj, ne, ns = len(junctions), len(edges), len(slacks)
    jdx = {j: i for i, j in enumerate(junctions)}
    edx = {e: i for i, e in enumerate(edges)}
    sdx = {s: i for i, s in enumerate(slacks)}
    n = 2 * nj + ne + ns

    iq = lambda j: jdx[j]
    ig = lambda j: nj + jdx[j]
    if_ = lambda e: 2 * nj + edx[e]
    iw = lambda s: 2 * nj + ne + sdx[s]

    phi0, p0 = scaling.phi0, scaling.p0
    a0sq = scaling.a0_sq_ref
    v0 = gc.a_ng**2 / a0sq
    v1 = (gc.a_h2**2 - gc.a_ng**2) / a0sq
    u_ratio = scaling.u0**2 / a0sq

    # per-junction scaled net controls
    inj_ng = {j: 0.0 for j in junctions}
    inj_h2 = {j: 0.0 for j in junctions}
    wdr = {j: 0.0 for j in junctions}
    for gid, gn in network.gnodes.items():
        if gn.kind == GNodeKind.NG_SUPPLY:
            inj_ng[gn.junction] += controls.s_ng.get(gid, 0.0) / phi0
        elif gn.kind == GNodeKind.H2_SUPPLY:
            inj_h2[gn.junction] += controls.s_h2.get(gid, 0.0) / phi0
        else:
            wdr[gn.junction] += controls.d.get(gid, 0.0) / phi0

    wey_coeff = {}
    for pid in network.pipe_ids:
        p = network.pipes[pid]
        lbar = p.length / scaling.l0
        dbar = p.diameter / scaling.l0
        abar = p.area / scaling.area0
        wey_coeff[pid] = p.friction * lbar / (dbar * abar**2) * u_ratio

    alpha = {c: controls.alpha.get(c, 1.0) for c in network.compressor_ids}
    incidence = {j: network.incidence(j) for j in junctions}

    def residual(u: np.ndarray) -> np.ndarray:
        F = np.zeros(n)
        for j in junctions:
            incoming, outgoing, _ = incidence[j]
            gj = u[ig(j)]
            through = sum(u[if_(e)] for e in outgoing) + wdr[j]
            if j in sdx:
                through += u[iw(j)]
            in_ng = in_h2 = 0.0
            for e in incoming:
                src = network.edge(e).from_junction
                gsrc = u[ig(src)]
                fe = u[if_(e)]
                in_ng += (1.0 - gsrc) * fe
                in_h2 += gsrc * fe
            F[jdx[j]] = (1.0 - gj) * through - in_ng - inj_ng[j]
            F[nj + jdx[j]] = gj * through - in_h2 - inj_h2[j]
        row = 2 * nj
        for pid in network.pipe_ids:
            p = network.pipes[pid]
            gi = u[ig(p.from_junction)]
            fe = u[if_(pid)]
            F[row] = (u[iq(p.from_junction)] - u[iq(p.to_junction)]
                      - wey_coeff[pid] * (v0 + v1 * gi) * fe * abs(fe))
            row += 1
        for cid in network.compressor_ids:
            c = network.compressors[cid]
            F[row] = u[iq(c.to_junction)] - alpha[cid]**2 * u[iq(c.from_junction)]
            row += 1
        for s in slacks:
            sigma_bar = network.junctions[s].slack_pressure / p0
            F[row] = u[iq(s)] - sigma_bar**2
            row += 1
        return F

    def jacobian(u: np.ndarray) -> np.ndarray:
        J = np.zeros((n, n))
        for j in junctions:
            incoming, outgoing, _ = incidence[j]
            gj = u[ig(j)]
            through = sum(u[if_(e)] for e in outgoing) + wdr[j]
            if j in sdx:
                through += u[iw(j)]
            rng, rh2 = jdx[j], nj + jdx[j]
            J[rng, ig(j)] += -through
            J[rh2, ig(j)] += through
            for e in outgoing:
                J[rng, if_(e)] += 1.0 - gj
                J[rh2, if_(e)] += gj
            if j in sdx:
                J[rng, iw(j)] += 1.0 - gj
                J[rh2, iw(j)] += gj
            for e in incoming:
                src = network.edge(e).from_junction
                gsrc = u[ig(src)]
                fe = u[if_(e)]
                J[rng, if_(e)] += -(1.0 - gsrc)
                J[rng, ig(src)] += fe
                J[rh2, if_(e)] += -gsrc
                J[rh2, ig(src)] += -fe
        row = 2 * nj
        for pid in network.pipe_ids:
            p = network.pipes[pid]
            gi = u[ig(p.from_junction)]
            fe = u[if_(pid)]
            J[row, iq(p.from_junction)] += 1.0
            J[row, iq(p.to_junction)] += -1.0
            J[row, if_(pid)] += -2.0 * wey_coeff[pid] * (v0 + v1 * gi) * abs(fe)
            J[row, ig(p.from_junction)] += -wey_coeff[pid] * v1 * fe * abs(fe)
            row += 1
        for cid in network.compressor_ids:
            c = network.compressors[cid]
            J[row, iq(c.to_junction)] += 1.0
            J[row, iq(c.from_junction)] += -alpha[cid]**2
            row += 1
        for s in slacks:
            J[row, iq(s)] += 1.0
            row += 1
        return J

    u = _initial_guess(network, controls, scaling, n, jdx, edx, sdx,
                       inj_ng, inj_h2, wdr)
    floored = False
    F = residual(u)
    norm = np.max(np.abs(F))
    for it in range(max_iterations):
        if norm <= tol:
            break
        J = jacobian(u)
        try:
            du = np.linalg.solve(J, -F)
            if not np.all(np.isfinite(du)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            du = np.linalg.lstsq(J, -F, rcond=None)[0]
        t = 1.0
        for _ in range(40):
            u_t = u.copy() + t * du
            clipped = u_t[:nj] < _Q_FLOOR
            if clipped.any():
                u_t[:nj] = np.maximum(u_t[:nj], _Q_FLOOR)
            F_t = residual(u_t)
            norm_t = np.max(np.abs(F_t))
            if norm_t < (1.0 - 1e-4 * t) * norm or norm_t < tol:
                floored = bool(clipped.any())
                u, F, norm = u_t, F_t, norm_t
                break
            t *= 0.5
        else:
            raise NonConvergence(
                f"stalled at residual {norm:.3e} after {it} iterations")
    else:
        if norm > 1e-10:
            raise NonConvergence(
                f"residual {norm:.3e} after {max_iterations} iterations")
    if floored or np.any(u[:nj] <= _Q_FLOOR):
        raise NegativePressure("squared pressure hit the positive floor")

    pressures = {j: float(np.sqrt(u[iq(j)]) * p0) for j in junctions}
    gamma_node = {j: float(u[ig(j)]) for j in junctions}
    flows = {e: float(u[if_(e)] * phi0) for e in edges}
    gamma_edge = {e: gamma_node[network.edge(e).from_junction] for e in edges}
    makeup = {s: float(u[iw(s)] * phi0) for s in slacks}
    return SimulationState(pressures=pressures, gamma_node=gamma_node,
                           flows=flows, gamma_edge=gamma_edge, makeup=makeup,
                           residual_norm=float(norm), iterations=it)


def _initial_guess(network, controls, scaling, n, jdx, edx, sdx,
                   inj_ng, inj_h2, wdr) -> np.ndarray:
    """Flat pressures, spanning-tree flow split, injection-ratio composition."""
    nj, ne = len(jdx), len(edx)
    u = np.zeros(n)
    slack0 = network.slack_junction_ids[0]
    sigma_bar = network.junctions[slack0].slack_pressure / scaling.p0
    u[:nj] = sigma_bar**2

    total_inj = sum(inj_ng.values()) + sum(inj_h2.values())
    gamma0 = (sum(inj_h2.values()) / total_inj) if total_inj > 0 else 0.0
    u[nj:2 * nj] = gamma0

    # net scaled withdrawal per junction; slack absorbs the overall imbalance
    net = {j: wdr[j] - inj_ng[j] - inj_h2[j] for j in jdx}
    u[2 * nj + ne + sdx[slack0]] = -sum(net.values())
    net[slack0] += -sum(net.values())

    # BFS tree rooted at the slack; accumulate subtree net withdrawals
    adj: dict[str, list[tuple[str, str]]] = {j: [] for j in jdx}
    for eid in network.edge_ids:
        e = network.edge(eid)
        adj[e.from_junction].append((e.to_junction, eid))
        adj[e.to_junction].append((e.from_junction, eid))
    parent: dict[str, tuple[str, str] | None] = {slack0: None}
    order = [slack0]
    for j in order:
        for nbr, eid in sorted(adj[j]):
            if nbr not in parent:
                parent[nbr] = (j, eid)
                order.append(nbr)
    acc = dict(net)
    for j in reversed(order[1:]):
        pj, eid = parent[j]
        acc[pj] += acc[j]
        edge = network.edge(eid)
        flow = acc[j] if edge.from_junction == pj else -acc[j]
        u[2 * nj + edx[eid]] = flow
    for eid in network.edge_ids:
        if u[2 * nj + edx[eid]] == 0.0:
            u[2 * nj + edx[eid]] = 1e-3
    return u


@dataclass
class CrosscheckReport:
    deviations: dict          # "kind:id" -> scaled deviation
    max_deviation: float
    worst: str
    passed: bool


def crosscheck(solution, network: Network, gc: GasConstants | None = None,
               scaling: ScalingConfig | None = None,
               tolerance: float = 1e-6) -> CrosscheckReport:
    """Resimulate an Optimal solution's controls and compare the states.

    Deviations are measured on scaled quantities relative to
    ``max(1, |reference|)``; the report fails if any exceeds ``tolerance``.
    """
    from .nlp import VK_ALPHA, VK_D, VK_GAMMA_NODE, VK_PHI, VK_PRESSURE, VK_S_H2, VK_S_NG
    from .solver import SolverStatus

    if solution.status != SolverStatus.OPTIMAL:
        raise SimulationError(f"crosscheck needs an Optimal solution, got "
                              f"{solution.status.value}")
    gc = gc or network.gas_constants
    scaling = scaling or default_scaling(network, gc)
    controls = ControlAssignment(
        s_ng={g: solution.primal[(VK_S_NG, g)]
              for g in network.gnodes_of_kind(GNodeKind.NG_SUPPLY)},
        s_h2={g: solution.primal[(VK_S_H2, g)]
              for g in network.gnodes_of_kind(GNodeKind.H2_SUPPLY)},
        d={g: solution.primal[(VK_D, g)]
           for g in network.gnodes_of_kind(GNodeKind.DEMAND_OPTIMIZED,
                                           GNodeKind.DEMAND_FIXED)},
        alpha={c: solution.primal[(VK_ALPHA, c)] for c in network.compressor_ids},
    )
    state = simulate(network, controls, gc, scaling)
    deviations = {}
    for j in network.junction_ids:
        ref = solution.primal[(VK_PRESSURE, j)] / scaling.p0
        sim = state.pressures[j] / scaling.p0
        deviations[f"pressure:{j}"] = abs(sim - ref) / max(1.0, abs(ref))
        refg = solution.primal[(VK_GAMMA_NODE, j)]
        deviations[f"gamma:{j}"] = abs(state.gamma_node[j] - refg) / max(1.0, abs(refg))
    for e in network.edge_ids:
        ref = solution.primal[(VK_PHI, e)] / scaling.phi0
        sim = state.flows[e] / scaling.phi0
        deviations[f"flow:{e}"] = abs(sim - ref) / max(1.0, abs(ref))
    worst = max(deviations, key=deviations.get)
    max_dev = deviations[worst]
    return CrosscheckReport(deviations=deviations, max_deviation=max_dev,
                            worst=worst, passed=max_dev <= tolerance)
