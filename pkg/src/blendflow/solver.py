"""Primal-dual interior-point solver for the assembled transport NLP.

Inequality rows get slack variables with a log barrier; variable bounds are
handled by the barrier directly.  Newton steps are taken on the perturbed
KKT system with an inertia-correcting diagonal regularization, a fraction-
to-boundary rule and a backtracking line search on an l1 penalty merit
function.  The problems here are small (tens to a few hundred variables),
so the KKT system is factorized densely: an LDL' factorization supplies the
inertia check and an LU factorization the solve.

The problem is nonconvex (bilinear mixing terms, quadratic pressure drop),
so only local optimality is certified; a deterministic multi-start over
perturbed initial points guards against poor local solutions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import ldl, lu_factor, lu_solve

from .network import GNodeKind
from .nlp import (VK_ALPHA, VK_D, VK_GAMMA_EDGE, VK_GAMMA_NODE, VK_PHI,
                  VK_PRESSURE, VK_S_H2, VK_S_NG, AssembledProblem)

logger = logging.getLogger("blendflow.solver")


class SolverStatus(str, Enum):
    OPTIMAL = "Optimal"
    MAX_ITERATIONS = "MaxIterations"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverOptions:
    kkt_tolerance: float = 1e-8      # scaled KKT residual target
    max_iterations: int = 500
    mu_init: float = 0.1             # initial barrier parameter
    mu_reduction: float = 0.2        # barrier reduction factor
    tau: float = 0.995               # fraction-to-boundary
    delta_init: float = 1e-8         # first inertia regularization
    binding_threshold: float = 1e-6  # scaled slack below which a row is active
    seed_count: int = 5              # multi-start size

    def __post_init__(self):
        if self.kkt_tolerance <= 0:
            raise ValueError("kkt_tolerance must be positive")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if not 0 < self.mu_reduction < 1:
            raise ValueError("mu_reduction must lie in (0, 1)")


@dataclass
class Solution:
    status: SolverStatus
    objective: float                       # J_EV [$ / s]
    primal: dict                           # (kind, id) -> physical value
    duals: dict                            # (kind, id) -> physical-consistent dual
    binding_set: list                      # active inequality ids, "kind:id"
    shadow_price_ng: dict                  # junction -> $/kg
    shadow_price_h2: dict
    shadow_price_blend: dict
    iterations: int
    kkt_residual: float
    seed: int = 0
    # scaled internals, kept for warm starts and cross-checks
    x_scaled: np.ndarray = field(default=None, repr=False)
    s: np.ndarray = field(default=None, repr=False)
    y: np.ndarray = field(default=None, repr=False)
    z: np.ndarray = field(default=None, repr=False)
    z_lower: np.ndarray = field(default=None, repr=False)
    z_upper: np.ndarray = field(default=None, repr=False)
    mu_final: float = 0.0
    trace: list = field(default_factory=list, repr=False)

    def value(self, kind: str, cid: str) -> float:
        return self.primal[(kind, cid)]


def initialize(problem: AssembledProblem) -> np.ndarray:
    """Default interior starting point.

    Flat pressures at the slack value, small positive flows, hydrogen
    fractions at the midpoint of their junction limits, boost ratios just
    above one, supplies and demands at 10% of their caps.
    """
    net, layout, scaling = problem.network, problem.layout, problem.scaling
    x = np.zeros(problem.n)
    slack_ids = net.slack_junction_ids
    sigma_bar = net.junctions[slack_ids[0]].slack_pressure / scaling.p0
    gamma_mid = {j: 0.5 * (net.junctions[j].gamma_min + net.junctions[j].gamma_max)
                 for j in net.junction_ids}
    for col, (kind, cid) in enumerate(layout.kinds):
        if kind == VK_PRESSURE:
            x[col] = sigma_bar
        elif kind == VK_GAMMA_NODE:
            x[col] = gamma_mid[cid]
        elif kind == VK_GAMMA_EDGE:
            x[col] = gamma_mid[net.pipes[cid].from_junction]
        elif kind == VK_ALPHA:
            x[col] = 1.0 + 1e-3
        elif kind == VK_PHI:
            x[col] = 1e-3
        elif kind in (VK_S_H2, VK_S_NG):
            x[col] = 0.1 * net.gnodes[cid].s_max / scaling.phi0
        elif kind == VK_D:
            gn = net.gnodes[cid]
            target = gn.g_max if gn.kind == GNodeKind.DEMAND_OPTIMIZED else gn.g_fixed
            rblend = problem.gc.r_ng + gamma_mid[gn.junction] * (problem.gc.r_h2 - problem.gc.r_ng)
            frac = 0.1 if gn.kind == GNodeKind.DEMAND_OPTIMIZED else 1.0
            x[col] = frac * target / rblend / scaling.phi0
    return _push_interior(problem, x)


def _push_interior(problem: AssembledProblem, x: np.ndarray,
                   margin: float = 1e-4) -> np.ndarray:
    lo, up = problem.lower, problem.upper
    x = x.copy()
    for i in range(len(x)):
        l, u = lo[i], up[i]
        if np.isfinite(l) and np.isfinite(u):
            pad = margin * (u - l)
            x[i] = min(max(x[i], l + pad), u - pad)
        elif np.isfinite(l):
            x[i] = max(x[i], l + margin * max(1.0, abs(l)))
        elif np.isfinite(u):
            x[i] = min(x[i], u - margin * max(1.0, abs(u)))
    return x


def _high_activity_start(problem: AssembledProblem) -> np.ndarray:
    """Busy-market starting point.

    Supplies and withdrawals at 70% of their caps, uniform flows, one
    network-wide hydrogen fraction.  Zero-flow states leave junction
    fractions physically indeterminate and admit spurious stationary points
    with phantom compositions; starting busy avoids that basin.
    """
    net, layout, scaling = problem.network, problem.layout, problem.scaling
    x = initialize(problem)
    h2_cap = sum(net.gnodes[g].s_max
                 for g in net.gnodes_of_kind(GNodeKind.H2_SUPPLY))
    ng_cap = sum(net.gnodes[g].s_max
                 for g in net.gnodes_of_kind(GNodeKind.NG_SUPPLY))
    achievable = h2_cap / max(h2_cap + ng_cap, 1e-12)
    gamma_all = min(achievable,
                    *(0.5 * (net.junctions[j].gamma_min + net.junctions[j].gamma_max)
                      for j in net.junction_ids))
    for col, (kind, cid) in enumerate(layout.kinds):
        if kind in (VK_S_H2, VK_S_NG):
            x[col] = 0.7 * net.gnodes[cid].s_max / scaling.phi0
        elif kind == VK_D:
            gn = net.gnodes[cid]
            target = gn.g_max if gn.kind == GNodeKind.DEMAND_OPTIMIZED else gn.g_fixed
            rblend = problem.gc.r_ng + gamma_all * (problem.gc.r_h2 - problem.gc.r_ng)
            frac = 0.7 if gn.kind == GNodeKind.DEMAND_OPTIMIZED else 1.0
            x[col] = frac * target / rblend / scaling.phi0
        elif kind == VK_PHI:
            x[col] = 0.2
        elif kind in (VK_GAMMA_NODE, VK_GAMMA_EDGE):
            x[col] = gamma_all
    return _push_interior(problem, x)


def _perturbed_start(problem: AssembledProblem, seed: int) -> np.ndarray:
    if seed == 0:
        return initialize(problem)
    if seed == 1:
        return _high_activity_start(problem)
    rng = np.random.default_rng(seed)
    x = initialize(problem) * (1.0 + 0.15 * rng.uniform(-1.0, 1.0, problem.n))
    x[x == 0.0] = 1e-4
    return _push_interior(problem, x)


@dataclass
class _IPState:
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    z: np.ndarray
    zL: np.ndarray
    zU: np.ndarray
    mu: float


class _KktWork:
    """Evaluations shared across one iteration."""

    def __init__(self, problem: AssembledProblem, st: _IPState, iL, iU, lo, up):
        sigma = problem.objective_scale
        self.grad_f = -sigma * problem.objective_gradient(st.x)
        self.h = problem.equality_residuals(st.x)
        self.g = problem.inequality_residuals(st.x)
        self.Jh = problem.equality_jacobian_dense(st.x)
        self.Jg = problem.inequality_jacobian_dense(st.x)
        self.zL_full = np.zeros(len(st.x))
        self.zU_full = np.zeros(len(st.x))
        self.zL_full[iL] = st.zL
        self.zU_full[iU] = st.zU
        self.r_stat = (self.grad_f + self.Jh.T @ st.y - self.Jg.T @ st.z
                       - self.zL_full + self.zU_full)
        self.dL = st.x[iL] - lo[iL]
        self.dU = up[iU] - st.x[iU]


def _kkt_error(st: _IPState, work: _KktWork, mu: float) -> float:
    """Unscaled KKT error.

    Deliberately not normalized by multiplier magnitudes: redundant
    constraint rows can blow the multipliers up, and a normalized error
    would then certify garbage stationary points as optimal.
    """
    e_stat = np.max(np.abs(work.r_stat)) if len(work.r_stat) else 0.0
    e_feas = max(np.max(np.abs(work.h)) if len(work.h) else 0.0,
                 np.max(np.abs(work.g - st.s)) if len(st.s) else 0.0)
    comp = [np.abs(st.s * st.z - mu)] if len(st.s) else []
    if len(st.zL):
        comp.append(np.abs(work.dL * st.zL - mu))
    if len(st.zU):
        comp.append(np.abs(work.dU * st.zU - mu))
    e_comp = max((c.max() for c in comp if len(c)), default=0.0)
    return max(e_stat, e_feas, e_comp)


def _inertia(d: np.ndarray, tiny: float = 1e-11) -> tuple[int, int, int]:
    """Inertia of the block-diagonal factor from scipy's LDL.

    The zero threshold is absolute: the factor blocks live on the scale of
    the regularization shifts, not of the (possibly huge) barrier entries.
    """
    n = d.shape[0]
    pos = neg = zero = 0
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            a, b, c = d[i, i], d[i + 1, i], d[i + 1, i + 1]
            tr, det = a + c, a * c - b * b
            disc = math.sqrt(max(tr * tr - 4.0 * det, 0.0))
            for ev in ((tr + disc) / 2.0, (tr - disc) / 2.0):
                if ev > tiny:
                    pos += 1
                elif ev < -tiny:
                    neg += 1
                else:
                    zero += 1
            i += 2
        else:
            a = d[i, i]
            if a > tiny:
                pos += 1
            elif a < -tiny:
                neg += 1
            else:
                zero += 1
            i += 1
    return pos, neg, zero


def _max_step(v: np.ndarray, dv: np.ndarray, tau: float,
              floor: np.ndarray | None = None) -> float:
    """Largest t <= 1 with v + t dv >= (1 - tau) v, for positive v.

    Components already parked at their safeguard floor are ignored: the
    post-step multiplier clip governs them, and letting them throttle the
    whole step stalls the dual iteration.
    """
    if len(v) == 0:
        return 1.0
    shrink = dv < 0.0
    if floor is not None:
        shrink &= v > 10.0 * floor
    if not shrink.any():
        return 1.0
    return float(min(1.0, np.min(-tau * v[shrink] / dv[shrink])))


def _ip_iterate(problem: AssembledProblem, options: SolverOptions,
                st: _IPState, max_iterations: int):
    """Run the interior-point iteration from a prepared state."""
    lo, up = problem.lower, problem.upper
    iL = np.where(np.isfinite(lo))[0]
    iU = np.where(np.isfinite(up))[0]
    n, me, mi = problem.n, problem.n_eq, problem.n_ineq
    N = n + mi + me + mi
    tol = options.kkt_tolerance
    # the barrier floor sits four decades below the tolerance so that active
    # inequalities, including weakly active ones, converge to slacks well
    # inside the binding threshold
    mu_min = tol / 1e4
    delta_last = 0.0
    delta_c_carry = 0.0
    fail_streak = 0
    trace: list[float] = []
    sigma = problem.objective_scale

    def barrier_value(x, s):
        val = -sigma * problem.objective(x)
        val -= st.mu * np.log(s).sum() if len(s) else 0.0
        val -= st.mu * np.log(x[iL] - lo[iL]).sum()
        val -= st.mu * np.log(up[iU] - x[iU]).sum()
        return val

    # filter line-search bookkeeping (re-initialized when the barrier moves)
    flt: list[tuple[float, float]] = []
    theta_init = None
    theta_max = theta_min = 0.0
    mu_flt = st.mu
    GAMMA_T, GAMMA_P, ETA = 1e-5, 1e-5, 1e-4
    S_THETA, S_PHI = 1.1, 2.3

    for it in range(max_iterations):
        work = _KktWork(problem, st, iL, iU, lo, up)
        e0 = _kkt_error(st, work, 0.0)
        trace.append(e0)
        if e0 <= tol and st.mu <= 10.0 * mu_min:
            return SolverStatus.OPTIMAL, it, e0, trace
        # dual rescue, endgame only: when stationarity error dwarfs every
        # other residual the equality multipliers have drifted (tiny accepted
        # steps cannot pull them back); re-estimate them by least squares
        e_other = max(np.max(np.abs(work.h)) if me else 0.0,
                      np.max(np.abs(work.g - st.s)) if mi else 0.0, st.mu)
        if st.mu <= 1e-5 and np.max(np.abs(work.r_stat)) > 100.0 * e_other:
            y_ls = _lsq_equality_multipliers(problem, st.x, st.z,
                                             work.zL_full, work.zU_full)
            r_ls = (work.grad_f + work.Jh.T @ y_ls - work.Jg.T @ st.z
                    - work.zL_full + work.zU_full)
            if np.all(np.isfinite(y_ls)) and \
                    np.max(np.abs(r_ls)) < 0.1 * np.max(np.abs(work.r_stat)):
                st.y = y_ls
                work = _KktWork(problem, st, iL, iU, lo, up)
                e0 = _kkt_error(st, work, 0.0)
                if e0 <= tol:
                    return SolverStatus.OPTIMAL, it, e0, trace
        # adaptive barrier: track a fraction of the average complementarity
        # gap, with a floor tied to the constraint violation so wandering
        # infeasible iterates stay centered; near the solution the gap and
        # the barrier collapse together
        theta_now = (np.abs(work.h).sum() + np.abs(work.g - st.s).sum())
        n_comp = max(1, mi + len(iL) + len(iU))
        gap = ((st.s @ st.z if mi else 0.0) + work.dL @ st.zL
               + work.dU @ st.zU) / n_comp
        mu_new = options.mu_reduction * gap
        mu_new = max(mu_new, min(options.mu_init,
                                 0.1 * theta_now / max(1, me + mi)))
        st.mu = float(np.clip(mu_new, mu_min, options.mu_init))
        if theta_init is None or not 0.5 * mu_flt <= st.mu <= 2.0 * mu_flt:
            flt.clear()
            mu_flt = st.mu
            theta_init = max(1.0, theta_now)
            theta_max = 1e4 * theta_init
            theta_min = 1e-4 * theta_init

        # assemble the KKT system
        W = problem.lagrangian_hessian_dense(st.x, st.y, st.z)
        sigL = np.zeros(n)
        sigU = np.zeros(n)
        sigL[iL] = st.zL / work.dL
        sigU[iU] = st.zU / work.dU
        sig_s = st.z / st.s if mi else np.zeros(0)

        rhs = np.concatenate([
            -(work.grad_f + work.Jh.T @ st.y - work.Jg.T @ st.z)
            + _sparse_fill(n, iL, st.mu / work.dL) - _sparse_fill(n, iU, st.mu / work.dU),
            st.mu / st.s - st.z if mi else np.zeros(0),
            -work.h,
            work.g - st.s,
        ])

        # redundant constraint rows (e.g. compressor continuity) force a
        # constraint-block shift every iteration: start from the remembered one
        delta_w, delta_c = 0.0, delta_c_carry
        step = None
        for attempt in range(40):
            K = np.zeros((N, N))
            K[:n, :n] = W
            K[np.arange(n), np.arange(n)] += sigL + sigU + delta_w
            if mi:
                K[n:n + mi, n:n + mi] = np.diag(sig_s + delta_w)
                K[n:n + mi, n + mi + me:] = np.eye(mi)
                K[n + mi + me:, n:n + mi] = np.eye(mi)
                K[:n, n + mi + me:] = -work.Jg.T
                K[n + mi + me:, :n] = -work.Jg
            K[:n, n + mi:n + mi + me] = work.Jh.T
            K[n + mi:n + mi + me, :n] = work.Jh
            if delta_c:
                idx = np.arange(n + mi, N)
                K[idx, idx] -= delta_c
            try:
                _, d, _ = ldl(K, lower=True)
                pos, neg, zero = _inertia(d)
            except Exception:
                pos, neg, zero = 0, 0, N
            if pos == n + mi and neg == me + mi and zero == 0:
                try:
                    lu = lu_factor(K)
                    step = lu_solve(lu, rhs)
                except Exception:
                    step = None
                if step is not None and np.all(np.isfinite(step)):
                    break
                step = None
            # zero pivots or excess positives point at dependent constraint
            # rows: regularize the constraint blocks; too few positives means
            # the reduced Hessian is not positive definite: shift the primal
            # blocks.
            if zero > 0 or pos > n + mi:
                delta_c = 1e-8 if delta_c == 0.0 else delta_c * 10.0
            if pos < n + mi or step is None and zero == 0 and pos == n + mi:
                delta_w = (max(options.delta_init, 0.33 * delta_last)
                           if delta_w == 0.0 else delta_w * 8.0)
            if delta_w > 1e12 or delta_c > 1e-2:
                return SolverStatus.NUMERICAL_FAILURE, it, e0, trace
        if step is None:
            return SolverStatus.NUMERICAL_FAILURE, it, e0, trace
        if delta_w:
            delta_last = delta_w
        delta_c_carry = delta_c

        dx = step[:n]
        ds = step[n:n + mi]
        dy = step[n + mi:n + mi + me]
        dz = step[n + mi + me:]
        dzL = st.mu / work.dL - st.zL - sigL[iL] * dx[iL]
        dzU = st.mu / work.dU - st.zU + sigU[iU] * dx[iU]

        # fraction-to-boundary step limits
        tau = options.tau
        a_primal = min(
            _max_step(st.s, ds, tau),
            _max_step(work.dL, dx[iL], tau),
            _max_step(work.dU, -dx[iU], tau),
        )
        a_dual = min(
            _max_step(st.z, dz, tau, st.mu / (1e10 * st.s)),
            _max_step(st.zL, dzL, tau, st.mu / (1e10 * work.dL)),
            _max_step(st.zU, dzU, tau, st.mu / (1e10 * work.dU)),
        )

        # filter line search on (constraint violation, barrier objective):
        # accept steps that improve feasibility or the barrier objective and
        # are not dominated by a previously recorded pair
        theta0 = theta_now
        phi0 = barrier_value(st.x, st.s)
        barrier_grad_x = (work.grad_f
                          - _sparse_fill(n, iL, st.mu / work.dL)
                          + _sparse_fill(n, iU, st.mu / work.dU))
        dphi = dx @ barrier_grad_x - (st.mu * (ds / st.s)).sum()

        def evaluate(x_t, s_t):
            ok = (np.all(s_t > 0.0) if mi else True) and \
                np.all(x_t[iL] > lo[iL]) and np.all(x_t[iU] < up[iU])
            if not ok:
                return None
            h_t = problem.equality_residuals(x_t)
            g_t = problem.inequality_residuals(x_t)
            theta_t = np.abs(h_t).sum() + np.abs(g_t - s_t).sum()
            return theta_t, barrier_value(x_t, s_t)

        def acceptable(theta_t, phi_t, t_ref):
            if theta_t >= theta_max:
                return False
            if any(theta_t >= tf and phi_t >= pf for tf, pf in flt):
                return False
            # near the solution the nominal decrease requirements fall below
            # machine precision; accept steps that do not measurably regress
            if (theta_t <= theta0 + 1e-14 * max(1.0, theta0)
                    and phi_t <= phi0 + 1e-13 * max(1.0, abs(phi0))):
                return True
            if (dphi < 0.0 and theta0 <= theta_min
                    and t_ref * (-dphi)**S_PHI > theta0**S_THETA):
                return phi_t <= phi0 + ETA * t_ref * dphi
            return (theta_t <= (1.0 - GAMMA_T) * theta0
                    or phi_t <= phi0 - GAMMA_P * theta0)

        t = a_primal
        accepted = False
        soc_tried = False
        phi_acc = None
        for _ in range(45):
            x_t = st.x + t * dx
            s_t = st.s + t * ds
            trial = evaluate(x_t, s_t)
            if trial is not None and acceptable(trial[0], trial[1], t):
                accepted = True
                phi_acc = trial[1]
                break
            # second-order correction: a full step often leaves a purely
            # quadratic constraint violation; re-solve with the corrected
            # residual before shrinking the step
            if not soc_tried and t == a_primal and trial is not None \
                    and trial[0] >= theta0:
                soc_tried = True
                c_soc_h = t * work.h + problem.equality_residuals(x_t)
                c_soc_g = t * (work.g - st.s) + (
                    problem.inequality_residuals(x_t) - s_t)
                rhs_soc = rhs.copy()
                rhs_soc[n + mi:n + mi + me] = -c_soc_h
                rhs_soc[n + mi + me:] = c_soc_g
                step_soc = lu_solve(lu, rhs_soc)
                dx_c = step_soc[:n]
                ds_c = step_soc[n:n + mi]
                t_c = min(_max_step(st.s, ds_c, tau),
                          _max_step(work.dL, dx_c[iL], tau),
                          _max_step(work.dU, -dx_c[iU], tau))
                trial_c = evaluate(st.x + t_c * dx_c, st.s + t_c * ds_c)
                if trial_c is not None and acceptable(trial_c[0], trial_c[1], t):
                    dx, ds = dx_c, ds_c
                    dy = step_soc[n + mi:n + mi + me]
                    dz = step_soc[n + mi + me:]
                    dzL = st.mu / work.dL - st.zL - sigL[iL] * dx[iL]
                    dzU = st.mu / work.dU - st.zU + sigU[iU] * dx[iU]
                    a_dual = min(
                        _max_step(st.z, dz, tau, st.mu / (1e10 * st.s)),
                        _max_step(st.zL, dzL, tau, st.mu / (1e10 * work.dL)),
                        _max_step(st.zU, dzU, tau, st.mu / (1e10 * work.dU)))
                    t = t_c
                    accepted = True
                    phi_acc = trial_c[1]
                    break
            t *= 0.5
        if not accepted:
            fail_streak += 1
            if fail_streak in (4, 8):
                # stale filter entries can wall off the only way forward
                flt.clear()
            elif fail_streak >= 12:
                status = (SolverStatus.INFEASIBLE if theta0 > 1e-4
                          else SolverStatus.NUMERICAL_FAILURE)
                return status, it, e0, trace
            continue
        fail_streak = 0
        # augment the filter unless the Armijo branch carried the step
        armijo_step = (dphi < 0.0 and theta0 <= theta_min
                       and t * (-dphi)**S_PHI > theta0**S_THETA
                       and phi_acc <= phi0 + ETA * t * dphi)
        if not armijo_step:
            flt.append(((1.0 - GAMMA_T) * theta0, phi0 - GAMMA_P * theta0))

        st.x = st.x + t * dx
        if mi:
            st.s = st.s + t * ds
            st.z = np.clip(st.z + a_dual * dz,
                           st.mu / (1e10 * st.s), 1e10 * st.mu / st.s)
        st.y = st.y + t * dy
        st.zL = np.clip(st.zL + a_dual * dzL,
                        st.mu / (1e10 * (st.x[iL] - lo[iL])),
                        1e10 * st.mu / (st.x[iL] - lo[iL]))
        st.zU = np.clip(st.zU + a_dual * dzU,
                        st.mu / (1e10 * (up[iU] - st.x[iU])),
                        1e10 * st.mu / (up[iU] - st.x[iU]))

        logger.debug("iter=%d mu=%.2e kkt=%.2e theta=%.2e step=%.2e dual_step=%.2e",
                     it, st.mu, e0, theta0, t, a_dual)

    work = _KktWork(problem, st, iL, iU, lo, up)
    e0 = _kkt_error(st, work, 0.0)
    trace.append(e0)
    status = SolverStatus.OPTIMAL if e0 <= tol else SolverStatus.MAX_ITERATIONS
    return status, max_iterations, e0, trace


def _sparse_fill(n: int, idx: np.ndarray, values: np.ndarray) -> np.ndarray:
    out = np.zeros(n)
    out[idx] = values
    return out


def _lsq_equality_multipliers(problem: AssembledProblem, x, z, zL_full, zU_full):
    """Least-squares estimate of the equality multipliers at a point.

    Minimizes the dual infeasibility over y; on rank-deficient constraint
    Jacobians (redundant rows) this picks the minimum-norm representative.
    """
    grad_f = -problem.objective_scale * problem.objective_gradient(x)
    Jh = problem.equality_jacobian_dense(x)
    Jg = problem.inequality_jacobian_dense(x)
    rhs = -(grad_f - Jg.T @ z - zL_full + zU_full)
    y, *_ = np.linalg.lstsq(Jh.T, rhs, rcond=None)
    return y


def _fresh_state(problem: AssembledProblem, x0: np.ndarray, mu0: float) -> _IPState:
    lo, up = problem.lower, problem.upper
    iL = np.where(np.isfinite(lo))[0]
    iU = np.where(np.isfinite(up))[0]
    g0 = problem.inequality_residuals(x0)
    s0 = np.maximum(g0, 1e-4)
    # multipliers start at moderate magnitudes; mu/s would explode on the
    # deliberately tiny initial slacks of flows and boost ratios
    z0 = np.clip(mu0 / s0, 1e-6, 1.0)
    zL0 = np.clip(mu0 / (x0[iL] - lo[iL]), 1e-6, 1.0)
    zU0 = np.clip(mu0 / (up[iU] - x0[iU]), 1e-6, 1.0)
    return _IPState(x=x0.copy(), s=s0, y=np.zeros(problem.n_eq),
                    z=z0, zL=zL0, zU=zU0, mu=mu0)


def _warm_state(problem: AssembledProblem, warm: Solution, mu0: float) -> _IPState:
    lo, up = problem.lower, problem.upper
    iL = np.where(np.isfinite(lo))[0]
    iU = np.where(np.isfinite(up))[0]
    x0 = _push_interior(problem, warm.x_scaled, margin=1e-8)
    s0 = np.maximum(problem.inequality_residuals(x0), 1e-10)
    zL0 = (np.maximum(warm.z_lower, 1e-10) if len(warm.z_lower) == len(iL)
           else np.clip(mu0 / (x0[iL] - lo[iL]), 1e-8, 1e6))
    zU0 = (np.maximum(warm.z_upper, 1e-10) if len(warm.z_upper) == len(iU)
           else np.clip(mu0 / (up[iU] - x0[iU]), 1e-8, 1e6))
    return _IPState(x=x0, s=s0, y=warm.y.copy(),
                    z=np.maximum(warm.z, 1e-10), zL=zL0, zU=zU0, mu=mu0)


def _package(problem: AssembledProblem, st: _IPState, status: SolverStatus,
             iterations: int, kkt: float, seed: int, trace: list) -> Solution:
    primal = problem.rescale_solution(st.x)
    obj = problem.objective(st.x)
    sigma = problem.objective_scale
    duals = {}
    for (kind, cid), row in problem.eq_index.items():
        duals[(kind, cid)] = st.y[row] / (sigma * problem.eq_scale[row])
    for (kind, cid), row in problem.ineq_index.items():
        duals[(kind, cid)] = st.z[row] / (sigma * problem.ineq_scale[row])
    shadow_ng, shadow_h2, shadow_blend = {}, {}, {}
    for jid in problem.network.junction_ids:
        ng = duals[("ng_balance", jid)]
        h2 = duals[("h2_balance", jid)]
        gamma = primal[(VK_GAMMA_NODE, jid)]
        shadow_ng[jid] = ng
        shadow_h2[jid] = h2
        shadow_blend[jid] = gamma * h2 + (1.0 - gamma) * ng
    return Solution(
        status=status, objective=obj, primal=primal, duals=duals,
        binding_set=[], shadow_price_ng=shadow_ng, shadow_price_h2=shadow_h2,
        shadow_price_blend=shadow_blend, iterations=iterations,
        kkt_residual=kkt, seed=seed, x_scaled=st.x.copy(), s=st.s.copy(),
        y=st.y.copy(), z=st.z.copy(), z_lower=st.zL.copy(),
        z_upper=st.zU.copy(), mu_final=st.mu, trace=trace,
    )


def _binding_set(problem: AssembledProblem, x: np.ndarray, threshold: float) -> list:
    g = problem.inequality_residuals(x)
    out = []
    for (kind, cid), row in sorted(problem.ineq_index.items(), key=lambda kv: kv[1]):
        if g[row] <= threshold:
            out.append(f"{kind}:{cid}")
    return out


def solve(problem: AssembledProblem, options: SolverOptions | None = None,
          warm_start: Solution | None = None) -> Solution:
    """Solve the assembled problem, optionally warm-starting from a prior solution.

    Cold solves run a deterministic multi-start (``options.seed_count``
    perturbed initial points) and return the best locally optimal solution by
    objective value.  Warm starts run a single solve from the supplied
    solution and fall back to the cold path if it does not reach optimality.
    """
    options = options or SolverOptions()
    candidates: list[Solution] = []

    if warm_start is not None and warm_start.x_scaled is not None:
        st = _warm_state(problem, warm_start, mu0=max(10 * options.kkt_tolerance, 1e-6))
        status, iters, kkt, trace = _ip_iterate(problem, options, st,
                                                options.max_iterations)
        sol = _package(problem, st, status, iters, kkt, seed=-1, trace=trace)
        sol.binding_set = _binding_set(problem, st.x, options.binding_threshold)
        candidates.append(sol)

    # the problem is nonconvex: even with a warm start, cold multi-starts run
    # as well and the best local solution by objective wins; once one start
    # has converged, the remaining seeds only matter if they converge too, so
    # they run on a reduced iteration budget
    for seed in range(max(1, options.seed_count)):
        have_optimal = any(c.status == SolverStatus.OPTIMAL for c in candidates)
        budget = min(options.max_iterations, 150) if have_optimal \
            else options.max_iterations
        x0 = _perturbed_start(problem, seed)
        st = _fresh_state(problem, x0, options.mu_init)
        status, iters, kkt, trace = _ip_iterate(problem, options, st, budget)
        sol = _package(problem, st, status, iters, kkt, seed=seed, trace=trace)
        sol.binding_set = _binding_set(problem, st.x, options.binding_threshold)
        candidates.append(sol)
        logger.debug("seed=%d status=%s objective=%.6f iters=%d",
                     seed, status.value, sol.objective, iters)

    best = candidates[0]
    for sol in candidates[1:]:
        if sol.status == SolverStatus.OPTIMAL and (
                best.status != SolverStatus.OPTIMAL
                or sol.objective > best.objective + 1e-12):
            best = sol
    return best


def extract_shadow_prices(solution: Solution, problem: AssembledProblem) -> dict:
    """Per-junction (NG, H2, blend) marginal values in $/kg.

    The NG and H2 prices are the duals of the junction mass balances; the
    blend price combines them linearly by the local hydrogen mass fraction.
    """
    if solution.status != SolverStatus.OPTIMAL:
        raise ValueError(f"shadow prices undefined at status {solution.status.value}")
    return {
        jid: (solution.shadow_price_ng[jid], solution.shadow_price_h2[jid],
              solution.shadow_price_blend[jid])
        for jid in problem.network.junction_ids
    }
