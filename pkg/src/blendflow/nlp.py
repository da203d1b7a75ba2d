"""Assembly of the economic blend-transport NLP in non-dimensional form.

Decision variables (id-sorted within each kind): hydrogen supplies, natural
gas supplies, withdrawals, compressor boost ratios, edge mass flows (pipes
and compressor edges), pipe hydrogen fractions, junction hydrogen fractions
and junction pressures.  Equality constraints are the per-junction NG and H2
mass balances, the pipe pressure-drop relation, the compressor boost
relation, concentration continuity per outgoing edge, slack pressures and
fixed energy deliveries.  Inequalities (``g(x) >= 0``) cover minimum
pressures, concentration limits, discharge pressure caps, boost ratio
limits, supply bounds and optimized energy-demand caps.

Flows are constrained nonnegative (fixed directions), so the pressure-drop
term uses ``phi^2``.  All rows are scaled: mass rows by ``phi0``, energy
rows by ``phi0 * r_ng``, pressure rows by ``p0`` (squared relations by
``p0^2``).  The objective is reported in physical $/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .constants import GasConstants
from .network import GNodeKind, Network
from .scaling import ScalingConfig, default_scaling


class AssemblyError(Exception):
    """A gNode lacks data required by its kind, or the network is unusable."""


# Variable kinds in layout order.
VK_S_H2 = "s_h2"
VK_S_NG = "s_ng"
VK_D = "d"
VK_ALPHA = "alpha"
VK_PHI = "phi"
VK_GAMMA_EDGE = "gamma_edge"
VK_GAMMA_NODE = "gamma_node"
VK_PRESSURE = "pressure"

# Box padding applied around limits that are also inequality rows, so the
# rows own the binding constraint and their duals stay well defined.
_PAD = 0.02


@dataclass(frozen=True)
class VariableLayout:
    """Bijection between (kind, component id) and column index."""

    kinds: list[tuple[str, str]]            # position -> (kind, id)
    index: dict[tuple[str, str], int]       # (kind, id) -> position

    @classmethod
    def build(cls, network: Network) -> "VariableLayout":
        kinds: list[tuple[str, str]] = []
        kinds += [(VK_S_H2, g) for g in network.gnodes_of_kind(GNodeKind.H2_SUPPLY)]
        kinds += [(VK_S_NG, g) for g in network.gnodes_of_kind(GNodeKind.NG_SUPPLY)]
        kinds += [(VK_D, g) for g in network.gnodes_of_kind(
            GNodeKind.DEMAND_OPTIMIZED, GNodeKind.DEMAND_FIXED)]
        kinds += [(VK_ALPHA, c) for c in network.compressor_ids]
        kinds += [(VK_PHI, e) for e in network.edge_ids]
        kinds += [(VK_GAMMA_EDGE, p) for p in network.pipe_ids]
        kinds += [(VK_GAMMA_NODE, j) for j in network.junction_ids]
        kinds += [(VK_PRESSURE, j) for j in network.junction_ids]
        return cls(kinds=kinds, index={ki: n for n, ki in enumerate(kinds)})

    def __len__(self) -> int:
        return len(self.kinds)

    def __getitem__(self, kind_id: tuple[str, str]) -> int:
        return self.index[kind_id]


@dataclass
class _JunctionTopo:
    """Precomputed column indices for one junction's balance rows."""
    gamma: int
    out_phi: list[int] = field(default_factory=list)
    in_phi: list[int] = field(default_factory=list)
    in_gamma: list[int] = field(default_factory=list)   # edge gamma or tail-node gamma
    d_cols: list[int] = field(default_factory=list)
    sng_cols: list[int] = field(default_factory=list)
    sh2_cols: list[int] = field(default_factory=list)


@dataclass
class AssembledProblem:
    """The scaled optimization instance with analytic derivatives."""

    network: Network
    gc: GasConstants
    scaling: ScalingConfig
    layout: VariableLayout
    lower: np.ndarray
    upper: np.ndarray
    eq_index: dict[tuple[str, str], int]
    ineq_index: dict[tuple[str, str], int]
    eq_scale: np.ndarray     # physical units per scaled residual unit
    ineq_scale: np.ndarray
    objective_scale: float   # internal minimization target is -objective_scale * J_EV

    # populated by assemble()
    _topo: dict[str, _JunctionTopo] = field(default_factory=dict)
    _wey: list = field(default_factory=list)
    _boost: list = field(default_factory=list)
    _cont: list = field(default_factory=list)
    _slack: list = field(default_factory=list)
    _fixed: list = field(default_factory=list)
    _ineq: list = field(default_factory=list)
    _obj_terms: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.layout)

    @property
    def n_eq(self) -> int:
        return len(self.eq_index)

    @property
    def n_ineq(self) -> int:
        return len(self.ineq_index)

    @property
    def eq_ids(self) -> list[tuple[str, str]]:
        rows = sorted(self.eq_index, key=self.eq_index.get)
        return rows

    @property
    def ineq_ids(self) -> list[tuple[str, str]]:
        return sorted(self.ineq_index, key=self.ineq_index.get)

    # -- blend helpers (scaled) --------------------------------------------

    def _vbar(self, gamma: float) -> float:
        gc, a0sq = self.gc, self.scaling.a0_sq_ref
        return (gc.a_ng**2 + gamma * (gc.a_h2**2 - gc.a_ng**2)) / a0sq

    # -- equality constraints ------------------------------------------------

    def equality_residuals(self, x: np.ndarray) -> np.ndarray:
        r = np.zeros(self.n_eq)
        nj = len(self.network.junction_ids)
        for row, jid in enumerate(self.network.junction_ids):
            t = self._topo[jid]
            gj = x[t.gamma]
            through = sum(x[c] for c in t.out_phi) + sum(x[c] for c in t.d_cols)
            inflow_ng = sum((1.0 - x[gcol]) * x[pcol]
                            for pcol, gcol in zip(t.in_phi, t.in_gamma))
            inflow_h2 = sum(x[gcol] * x[pcol]
                            for pcol, gcol in zip(t.in_phi, t.in_gamma))
            r[row] = (1.0 - gj) * through - inflow_ng - sum(x[c] for c in t.sng_cols)
            r[nj + row] = gj * through - inflow_h2 - sum(x[c] for c in t.sh2_cols)
        for row, (pi, pj, phi, ge, w) in self._wey:
            r[row] = x[pi]**2 - x[pj]**2 - w * self._vbar(x[ge]) * x[phi]**2
        for row, (pi, pj, a) in self._boost:
            r[row] = x[pj]**2 - x[a]**2 * x[pi]**2
        for row, (ga, gb) in self._cont:
            r[row] = x[ga] - x[gb]
        for row, (pcol, sigma_bar) in self._slack:
            r[row] = x[pcol] - sigma_bar
        for row, (dcol, gcol, gbar) in self._fixed:
            r[row] = x[dcol] * self._rblend_ratio(x[gcol]) - gbar
        return r

    def _rblend_ratio(self, gamma: float) -> float:
        """Blend calorific value divided by the NG calorific value."""
        return 1.0 + gamma * (self.gc.r_h2 - self.gc.r_ng) / self.gc.r_ng

    def equality_jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix(self.equality_jacobian_dense(x))

    def equality_jacobian_dense(self, x: np.ndarray) -> np.ndarray:
        J = np.zeros((self.n_eq, self.n))
        nj = len(self.network.junction_ids)
        rho = (self.gc.r_h2 - self.gc.r_ng) / self.gc.r_ng
        for row, jid in enumerate(self.network.junction_ids):
            t = self._topo[jid]
            gj = x[t.gamma]
            through = sum(x[c] for c in t.out_phi) + sum(x[c] for c in t.d_cols)
            J[row, t.gamma] += -through
            J[nj + row, t.gamma] += through
            for c in t.out_phi + t.d_cols:
                J[row, c] += 1.0 - gj
                J[nj + row, c] += gj
            for pcol, gcol in zip(t.in_phi, t.in_gamma):
                J[row, pcol] += -(1.0 - x[gcol])
                J[row, gcol] += x[pcol]
                J[nj + row, pcol] += -x[gcol]
                J[nj + row, gcol] += -x[pcol]
            for c in t.sng_cols:
                J[row, c] += -1.0
            for c in t.sh2_cols:
                J[nj + row, c] += -1.0
        for row, (pi, pj, phi, ge, w) in self._wey:
            v1 = (self.gc.a_h2**2 - self.gc.a_ng**2) / self.scaling.a0_sq_ref
            J[row, pi] += 2.0 * x[pi]
            J[row, pj] += -2.0 * x[pj]
            J[row, phi] += -2.0 * w * self._vbar(x[ge]) * x[phi]
            J[row, ge] += -w * v1 * x[phi]**2
        for row, (pi, pj, a) in self._boost:
            J[row, pj] += 2.0 * x[pj]
            J[row, pi] += -2.0 * x[a]**2 * x[pi]
            J[row, a] += -2.0 * x[a] * x[pi]**2
        for row, (ga, gb) in self._cont:
            J[row, ga] += 1.0
            J[row, gb] += -1.0
        for row, (pcol, _) in self._slack:
            J[row, pcol] += 1.0
        for row, (dcol, gcol, _) in self._fixed:
            J[row, dcol] += self._rblend_ratio(x[gcol])
            J[row, gcol] += x[dcol] * rho
        return J

    # -- inequality constraints ----------------------------------------------

    def inequality_residuals(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.n_ineq)
        for row, kind, cols, consts in self._ineq:
            if kind == "lin":
                g[row] = consts[0] + sum(c * x[i] for i, c in cols)
            elif kind == "discharge":
                a, pi, pmax_bar = cols[0], cols[1], consts[0]
                g[row] = pmax_bar - x[a] * x[pi]
            else:  # energy cap
                d, gcol, gmax_bar = cols[0], cols[1], consts[0]
                g[row] = gmax_bar - x[d] * self._rblend_ratio(x[gcol])
        return g

    def inequality_jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix(self.inequality_jacobian_dense(x))

    def inequality_jacobian_dense(self, x: np.ndarray) -> np.ndarray:
        J = np.zeros((self.n_ineq, self.n))
        rho = (self.gc.r_h2 - self.gc.r_ng) / self.gc.r_ng
        for row, kind, cols, consts in self._ineq:
            if kind == "lin":
                for i, c in cols:
                    J[row, i] += c
            elif kind == "discharge":
                a, pi = cols
                J[row, a] += -x[pi]
                J[row, pi] += -x[a]
            else:
                d, gcol = cols
                J[row, d] += -self._rblend_ratio(x[gcol])
                J[row, gcol] += -x[d] * rho
        return J

    # -- objective -------------------------------------------------------------

    def _power_pieces(self, gamma: float):
        """Blend-dependent factors of the compression power and their derivatives."""
        gc = self.gc
        kp, kq = gc.kappa_ng, gc.kappa_h2 - gc.kappa_ng
        gp, gq = gc.g_ng, gc.g_h2 - gc.g_ng
        kappa = kp + kq * gamma
        grav = gp + gq * gamma
        m = (kappa - 1.0) / kappa
        mp = kq / kappa**2
        mpp = -2.0 * kq**2 / kappa**3
        at = 286.76 * gc.t_suction
        cf = at * m / grav
        cfp = at * (mp / grav - m * gq / grav**2)
        cfpp = at * (mpp / grav - 2.0 * mp * gq / grav**2 + 2.0 * m * gq**2 / grav**3)
        return cf, cfp, cfpp, m, mp, mpp

    def compressor_power_scaled(self, x: np.ndarray, cid: str) -> float:
        """Power of one compressor [kW] at the scaled state x."""
        a, phi, gcol = self._obj_terms["power"][cid]
        cf, _, _, m, _, _ = self._power_pieces(x[gcol])
        return cf * (x[a]**m - 1.0) * x[phi] * self.scaling.phi0

    def objective(self, x: np.ndarray) -> float:
        """Economic value J_EV [$ / s] at the scaled state x (to be maximized)."""
        phi0 = self.scaling.phi0
        gc = self.gc
        total = 0.0
        for dcol, gcol, c_d, c_co2 in self._obj_terms["demand"]:
            rblend = gc.r_ng + x[gcol] * (gc.r_h2 - gc.r_ng)
            total += c_d * x[dcol] * phi0 * rblend
            total += c_co2 * x[dcol] * phi0 * x[gcol] * (gc.r_h2 / gc.r_ng) * gc.zeta_ng
        for scol, price in self._obj_terms["supply"]:
            total -= price * x[scol] * phi0
        for cid in self.network.compressor_ids:
            total -= gc.eta * self.compressor_power_scaled(x, cid)
        return total

    def objective_gradient(self, x: np.ndarray) -> np.ndarray:
        grad = np.zeros(self.n)
        phi0 = self.scaling.phi0
        gc = self.gc
        rho = gc.r_h2 - gc.r_ng
        cr = (gc.r_h2 / gc.r_ng) * gc.zeta_ng
        for dcol, gcol, c_d, c_co2 in self._obj_terms["demand"]:
            grad[dcol] += c_d * phi0 * (gc.r_ng + x[gcol] * rho) + c_co2 * phi0 * x[gcol] * cr
            grad[gcol] += c_d * x[dcol] * phi0 * rho + c_co2 * x[dcol] * phi0 * cr
        for scol, price in self._obj_terms["supply"]:
            grad[scol] -= price * phi0
        for cid, (a, phi, gcol) in self._obj_terms["power"].items():
            cf, cfp, _, m, mp, _ = self._power_pieces(x[gcol])
            alpha, fl = x[a], x[phi]
            am = alpha**m
            lna = math.log(alpha)
            grad[phi] -= gc.eta * cf * (am - 1.0) * phi0
            grad[a] -= gc.eta * cf * m * alpha**(m - 1.0) * fl * phi0
            grad[gcol] -= gc.eta * (cfp * (am - 1.0) + cf * am * lna * mp) * fl * phi0
        return grad

    def objective_hessian(self, x: np.ndarray) -> np.ndarray:
        H = np.zeros((self.n, self.n))
        phi0 = self.scaling.phi0
        gc = self.gc
        rho = gc.r_h2 - gc.r_ng
        cr = (gc.r_h2 / gc.r_ng) * gc.zeta_ng
        for dcol, gcol, c_d, c_co2 in self._obj_terms["demand"]:
            cross = c_d * phi0 * rho + c_co2 * phi0 * cr
            H[dcol, gcol] += cross
            H[gcol, dcol] += cross
        for cid, (a, phi, gcol) in self._obj_terms["power"].items():
            cf, cfp, cfpp, m, mp, mpp = self._power_pieces(x[gcol])
            alpha, fl = x[a], x[phi]
            am = alpha**m
            lna = math.log(alpha)
            k = -gc.eta * phi0
            w_aa = cf * m * (m - 1.0) * alpha**(m - 2.0) * fl
            w_ap = cf * m * alpha**(m - 1.0)
            w_ag = (cfp * m + cf * mp * (1.0 + m * lna)) * alpha**(m - 1.0) * fl
            w_pg = cfp * (am - 1.0) + cf * am * lna * mp
            w_gg = (cfpp * (am - 1.0) + 2.0 * cfp * am * lna * mp
                    + cf * am * (lna**2 * mp**2 + lna * mpp)) * fl
            for (i, j, v) in ((a, a, w_aa), (a, phi, w_ap), (a, gcol, w_ag),
                              (phi, gcol, w_pg), (gcol, gcol, w_gg)):
                H[i, j] += k * v
                if i != j:
                    H[j, i] += k * v
        return H

    def lagrangian_hessian(self, x: np.ndarray, eq_multipliers: np.ndarray,
                           ineq_multipliers: np.ndarray,
                           obj_scale: float | None = None) -> sp.csr_matrix:
        """Hessian of obj_scale * (-J_EV) + lam' h + mu' (-g); exact and symmetric."""
        return sp.csr_matrix(self.lagrangian_hessian_dense(
            x, eq_multipliers, ineq_multipliers, obj_scale))

    def lagrangian_hessian_dense(self, x: np.ndarray, eq_multipliers: np.ndarray,
                                 ineq_multipliers: np.ndarray,
                                 obj_scale: float | None = None) -> np.ndarray:
        sigma = self.objective_scale if obj_scale is None else obj_scale
        lam, mu = np.asarray(eq_multipliers), np.asarray(ineq_multipliers)
        if lam.shape != (self.n_eq,) or mu.shape != (self.n_ineq,):
            raise ValueError("multiplier dimensions do not match constraint counts")
        H = -sigma * self.objective_hessian(x)
        nj = len(self.network.junction_ids)
        for row, jid in enumerate(self.network.junction_ids):
            t = self._topo[jid]
            l_ng, l_h2 = lam[row], lam[nj + row]
            for c in t.out_phi + t.d_cols:
                H[t.gamma, c] += -l_ng + l_h2
                H[c, t.gamma] += -l_ng + l_h2
            for pcol, gcol in zip(t.in_phi, t.in_gamma):
                H[gcol, pcol] += l_ng - l_h2
                H[pcol, gcol] += l_ng - l_h2
        v1 = (self.gc.a_h2**2 - self.gc.a_ng**2) / self.scaling.a0_sq_ref
        for row, (pi, pj, phi, ge, w) in self._wey:
            l = lam[row]
            H[pi, pi] += 2.0 * l
            H[pj, pj] += -2.0 * l
            H[phi, phi] += -2.0 * w * self._vbar(x[ge]) * l
            H[phi, ge] += -2.0 * w * v1 * x[phi] * l
            H[ge, phi] += -2.0 * w * v1 * x[phi] * l
        for row, (pi, pj, a) in self._boost:
            l = lam[row]
            H[pj, pj] += 2.0 * l
            H[pi, pi] += -2.0 * x[a]**2 * l
            H[a, a] += -2.0 * x[pi]**2 * l
            H[a, pi] += -4.0 * x[a] * x[pi] * l
            H[pi, a] += -4.0 * x[a] * x[pi] * l
        rho = (self.gc.r_h2 - self.gc.r_ng) / self.gc.r_ng
        for row, (dcol, gcol, _) in self._fixed:
            H[dcol, gcol] += rho * lam[row]
            H[gcol, dcol] += rho * lam[row]
        for row, kind, cols, consts in self._ineq:
            if kind == "discharge":
                a, pi = cols
                H[a, pi] += mu[row]        # -mu * d2g, with d2g(a,pi) = -1
                H[pi, a] += mu[row]
            elif kind == "energy":
                d, gcol = cols
                H[d, gcol] += mu[row] * rho
                H[gcol, d] += mu[row] * rho
        return H

    # -- scaling helpers ---------------------------------------------------

    def rescale_solution(self, x: np.ndarray) -> dict[tuple[str, str], float]:
        """Physical-unit value of every decision variable."""
        phi0, p0 = self.scaling.phi0, self.scaling.p0
        factor = {VK_S_H2: phi0, VK_S_NG: phi0, VK_D: phi0, VK_ALPHA: 1.0,
                  VK_PHI: phi0, VK_GAMMA_EDGE: 1.0, VK_GAMMA_NODE: 1.0,
                  VK_PRESSURE: p0}
        return {ki: factor[ki[0]] * x[n] for n, ki in enumerate(self.layout.kinds)}

    def scale_solution(self, physical: dict[tuple[str, str], float]) -> np.ndarray:
        """Inverse of rescale_solution."""
        phi0, p0 = self.scaling.phi0, self.scaling.p0
        factor = {VK_S_H2: phi0, VK_S_NG: phi0, VK_D: phi0, VK_ALPHA: 1.0,
                  VK_PHI: phi0, VK_GAMMA_EDGE: 1.0, VK_GAMMA_NODE: 1.0,
                  VK_PRESSURE: p0}
        x = np.zeros(self.n)
        for n, ki in enumerate(self.layout.kinds):
            x[n] = physical[ki] / factor[ki[0]]
        return x


def assemble(network: Network, gc: GasConstants | None = None,
             scaling: ScalingConfig | None = None,
             objective_scale: float = 1e-2) -> AssembledProblem:
    """Build the scaled NLP for a validated network."""
    gc = gc or network.gas_constants
    scaling = scaling or default_scaling(network, gc)
    layout = VariableLayout.build(network)
    n = len(layout)
    phi0, p0 = scaling.phi0, scaling.p0
    e0 = phi0 * gc.r_ng   # energy row scale [MJ/s]

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    init_hint = {}

    for col, (kind, cid) in enumerate(layout.kinds):
        if kind in (VK_S_H2, VK_S_NG):
            smax_bar = network.gnodes[cid].s_max / phi0
            lower[col] = -_PAD * max(1.0, smax_bar)
            upper[col] = (1.0 + _PAD) * smax_bar
        elif kind == VK_D:
            lower[col] = 0.0
        elif kind == VK_ALPHA:
            comp = network.compressors[cid]
            lower[col] = 1.0 - _PAD
            upper[col] = comp.alpha_max + _PAD
        elif kind == VK_PHI:
            lower[col] = 0.0
        elif kind == VK_GAMMA_EDGE:
            lower[col], upper[col] = -0.1, 1.1
        elif kind == VK_GAMMA_NODE:
            junc = network.junctions[cid]
            lower[col] = max(junc.gamma_min - _PAD, -0.1)
            upper[col] = min(junc.gamma_max + _PAD, 1.1)
        elif kind == VK_PRESSURE:
            lower[col] = 0.02

    problem = AssembledProblem(
        network=network, gc=gc, scaling=scaling, layout=layout,
        lower=lower, upper=upper, eq_index={}, ineq_index={},
        eq_scale=np.zeros(0), ineq_scale=np.zeros(0),
        objective_scale=objective_scale,
    )

    # junction topology for balance rows
    for jid in network.junction_ids:
        incoming, outgoing, attached = network.incidence(jid)
        t = _JunctionTopo(gamma=layout[VK_GAMMA_NODE, jid])
        for eid in outgoing:
            t.out_phi.append(layout[VK_PHI, eid])
        for eid in incoming:
            t.in_phi.append(layout[VK_PHI, eid])
            if eid in network.pipes:
                t.in_gamma.append(layout[VK_GAMMA_EDGE, eid])
            else:
                tail = network.compressors[eid].from_junction
                t.in_gamma.append(layout[VK_GAMMA_NODE, tail])
        for gid in attached:
            gn = network.gnodes[gid]
            if gn.kind == GNodeKind.NG_SUPPLY:
                t.sng_cols.append(layout[VK_S_NG, gid])
            elif gn.kind == GNodeKind.H2_SUPPLY:
                t.sh2_cols.append(layout[VK_S_H2, gid])
            else:
                t.d_cols.append(layout[VK_D, gid])
        problem._topo[jid] = t

    # equality rows: NG balances, H2 balances, pressure drop, boost,
    # continuity, slack pressures, fixed deliveries
    eq_index: dict[tuple[str, str], int] = {}
    eq_scale: list[float] = []

    def add_eq(kind: str, cid: str, scale: float) -> int:
        row = len(eq_index)
        eq_index[(kind, cid)] = row
        eq_scale.append(scale)
        return row

    for jid in network.junction_ids:
        add_eq("ng_balance", jid, phi0)
    for jid in network.junction_ids:
        add_eq("h2_balance", jid, phi0)
    u_ratio = scaling.u0**2 / scaling.a0_sq_ref
    for pid in network.pipe_ids:
        pipe = network.pipes[pid]
        row = add_eq("weymouth", pid, p0**2)
        lbar = pipe.length / scaling.l0
        dbar = pipe.diameter / scaling.l0
        abar = pipe.area / scaling.area0
        w = pipe.friction * lbar / (dbar * abar**2) * u_ratio
        problem._wey.append((row, (
            layout[VK_PRESSURE, pipe.from_junction],
            layout[VK_PRESSURE, pipe.to_junction],
            layout[VK_PHI, pid],
            layout[VK_GAMMA_EDGE, pid],
            w,
        )))
    for cid in network.compressor_ids:
        comp = network.compressors[cid]
        row = add_eq("boost", cid, p0**2)
        problem._boost.append((row, (
            layout[VK_PRESSURE, comp.from_junction],
            layout[VK_PRESSURE, comp.to_junction],
            layout[VK_ALPHA, cid],
        )))
    for eid in network.edge_ids:
        row = add_eq("continuity", eid, 1.0)
        if eid in network.pipes:
            pipe = network.pipes[eid]
            pair = (layout[VK_GAMMA_NODE, pipe.from_junction],
                    layout[VK_GAMMA_EDGE, eid])
        else:
            comp = network.compressors[eid]
            # compressor edges carry composition through unchanged
            pair = (layout[VK_GAMMA_NODE, comp.to_junction],
                    layout[VK_GAMMA_NODE, comp.from_junction])
        problem._cont.append((row, pair))
    for jid in network.slack_junction_ids:
        row = add_eq("slack_pressure", jid, p0)
        problem._slack.append((row, (
            layout[VK_PRESSURE, jid],
            network.junctions[jid].slack_pressure / p0,
        )))
    for gid in network.gnodes_of_kind(GNodeKind.DEMAND_FIXED):
        gn = network.gnodes[gid]
        row = add_eq("fixed_demand", gid, e0)
        problem._fixed.append((row, (
            layout[VK_D, gid],
            layout[VK_GAMMA_NODE, gn.junction],
            gn.g_fixed / e0,
        )))

    # inequality rows, g(x) >= 0
    ineq_index: dict[tuple[str, str], int] = {}
    ineq_scale: list[float] = []

    def add_ineq(kind: str, cid: str, scale: float, body_kind: str, cols, consts):
        row = len(ineq_index)
        ineq_index[(kind, cid)] = row
        ineq_scale.append(scale)
        problem._ineq.append((row, body_kind, cols, consts))

    for jid in network.junction_ids:
        junc = network.junctions[jid]
        pcol = layout[VK_PRESSURE, jid]
        gcol = layout[VK_GAMMA_NODE, jid]
        add_ineq("pressure_min", jid, p0, "lin",
                 [(pcol, 1.0)], (-junc.p_min / p0,))
        add_ineq("conc_min", jid, 1.0, "lin", [(gcol, 1.0)], (-junc.gamma_min,))
        add_ineq("conc_max", jid, 1.0, "lin", [(gcol, -1.0)], (junc.gamma_max,))
    for cid in network.compressor_ids:
        comp = network.compressors[cid]
        acol = layout[VK_ALPHA, cid]
        picol = layout[VK_PRESSURE, comp.from_junction]
        add_ineq("discharge_max", cid, p0, "discharge",
                 (acol, picol), (comp.p_discharge_max / p0,))
        add_ineq("boost_min", cid, 1.0, "lin", [(acol, 1.0)], (-1.0,))
        add_ineq("boost_max", cid, 1.0, "lin", [(acol, -1.0)], (comp.alpha_max,))
    for gid in network.gnodes_of_kind(GNodeKind.NG_SUPPLY):
        scol = layout[VK_S_NG, gid]
        smax_bar = network.gnodes[gid].s_max / phi0
        add_ineq("ng_supply_min", gid, phi0, "lin", [(scol, 1.0)], (0.0,))
        add_ineq("ng_supply_max", gid, phi0, "lin", [(scol, -1.0)], (smax_bar,))
    for gid in network.gnodes_of_kind(GNodeKind.H2_SUPPLY):
        scol = layout[VK_S_H2, gid]
        smax_bar = network.gnodes[gid].s_max / phi0
        add_ineq("h2_supply_min", gid, phi0, "lin", [(scol, 1.0)], (0.0,))
        add_ineq("h2_supply_max", gid, phi0, "lin", [(scol, -1.0)], (smax_bar,))
    for gid in network.gnodes_of_kind(GNodeKind.DEMAND_OPTIMIZED):
        gn = network.gnodes[gid]
        if gn.energy_bid_price < 0:
            raise AssemblyError(f"{gid}: missing bid price")
        add_ineq("energy_max", gid, e0, "energy",
                 (layout[VK_D, gid], layout[VK_GAMMA_NODE, gn.junction]),
                 (gn.g_max / e0,))

    # objective bookkeeping
    demand_terms = []
    for gid in network.gnodes_of_kind(GNodeKind.DEMAND_OPTIMIZED, GNodeKind.DEMAND_FIXED):
        gn = network.gnodes[gid]
        demand_terms.append((layout[VK_D, gid],
                             layout[VK_GAMMA_NODE, gn.junction],
                             gn.energy_bid_price, gn.carbon_price))
    supply_terms = []
    for gid in network.gnodes_of_kind(GNodeKind.H2_SUPPLY):
        supply_terms.append((layout[VK_S_H2, gid], network.gnodes[gid].offer_price))
    for gid in network.gnodes_of_kind(GNodeKind.NG_SUPPLY):
        supply_terms.append((layout[VK_S_NG, gid], network.gnodes[gid].offer_price))
    power_terms = {}
    for cid in network.compressor_ids:
        comp = network.compressors[cid]
        power_terms[cid] = (layout[VK_ALPHA, cid], layout[VK_PHI, cid],
                            layout[VK_GAMMA_NODE, comp.from_junction])
    problem._obj_terms = {"demand": demand_terms, "supply": supply_terms,
                          "power": power_terms}

    problem.eq_index = eq_index
    problem.ineq_index = ineq_index
    problem.eq_scale = np.array(eq_scale)
    problem.ineq_scale = np.array(ineq_scale)
    return problem
