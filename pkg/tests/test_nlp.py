"""Assembly structure and analytic-derivative correctness.

Every derivative is checked against central finite differences at random
interior points; expected residual values are computed from documented
constants and the module's stated row scaling.
"""

import math

import numpy as np
import pytest

from blendflow import (assemble, bundled_network_path, default_scaling,
                       initialize, load_network, network_from_dict)
from blendflow.nlp import (VK_ALPHA, VK_D, VK_GAMMA_EDGE, VK_GAMMA_NODE,
                           VK_PHI, VK_PRESSURE, VK_S_H2, VK_S_NG)


@pytest.fixture(scope="module")
def single():
    net = load_network(bundled_network_path("single_pipe"))
    return assemble(net)


@pytest.fixture(scope="module")
def eight():
    net = load_network(bundled_network_path("eight_node"))
    return assemble(net)


class TestLayout:
    def test_single_pipe_variable_set(self, single):
        expected = {
            (VK_S_H2, "S2"), (VK_S_NG, "S1"), (VK_D, "D1"), (VK_ALPHA, "C1"),
            (VK_PHI, "C1"), (VK_PHI, "P1"), (VK_GAMMA_EDGE, "P1"),
            (VK_GAMMA_NODE, "J1"), (VK_GAMMA_NODE, "J2"), (VK_GAMMA_NODE, "J3"),
            (VK_PRESSURE, "J1"), (VK_PRESSURE, "J2"), (VK_PRESSURE, "J3"),
        }
        assert set(single.layout.kinds) == expected
        assert len(single.layout) == 13

    def test_single_pipe_equality_rows(self, single):
        # 2 balances x 3 junctions + 1 pressure drop + 1 boost
        # + 2 continuity (P1 and C1) + 1 slack pressure
        by_kind = {}
        for kind, cid in single.eq_index:
            by_kind.setdefault(kind, []).append(cid)
        assert len(by_kind["ng_balance"]) == 3
        assert len(by_kind["h2_balance"]) == 3
        assert by_kind["weymouth"] == ["P1"]
        assert by_kind["boost"] == ["C1"]
        assert sorted(by_kind["continuity"]) == ["C1", "P1"]
        assert by_kind["slack_pressure"] == ["J1"]
        assert single.n_eq == 11

    def test_layout_bijection(self, eight):
        assert len(eight.layout.index) == len(eight.layout.kinds)
        for pos, ki in enumerate(eight.layout.kinds):
            assert eight.layout[ki] == pos

    def test_scaled_slack_bound(self, single):
        # sigma = 5 MPa with p0 = 5 MPa scales to exactly one
        row = single.eq_index[("slack_pressure", "J1")]
        x = initialize(single)
        x[single.layout[(VK_PRESSURE, "J1")]] = 1.0
        assert single.equality_residuals(x)[row] == pytest.approx(0.0, abs=1e-15)


def _interior_point(problem, seed):
    rng = np.random.default_rng(seed)
    x = initialize(problem)
    x = x * (1.0 + 0.3 * rng.uniform(-1.0, 1.0, len(x)))
    lo, up = problem.lower, problem.upper
    for i in range(len(x)):
        l, u = lo[i], up[i]
        if np.isfinite(l) and np.isfinite(u):
            pad = 0.15 * (u - l)
            x[i] = min(max(x[i], l + pad), u - pad)
        elif np.isfinite(l):
            x[i] = max(x[i], l + 0.05)
    return x


def _fd_gradient(f, x, h=1e-6):
    g = np.zeros(len(x))
    for i in range(len(x)):
        step = h * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def _fd_jacobian(f, x, m, h=1e-6):
    J = np.zeros((m, len(x)))
    for i in range(len(x)):
        step = h * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        J[:, i] = (f(xp) - f(xm)) / (2.0 * step)
    return J


def _max_rel(err_a, err_b):
    return np.max(np.abs(err_a - err_b) / np.maximum(1.0, np.abs(err_b)))


@pytest.mark.parametrize("fixture_name", ["single", "eight"])
class TestDerivatives:
    def test_objective_gradient(self, fixture_name, request):
        problem = request.getfixturevalue(fixture_name)
        for seed in range(10):
            x = _interior_point(problem, seed)
            fd = _fd_gradient(problem.objective, x)
            assert _max_rel(problem.objective_gradient(x), fd) < 1e-6

    def test_equality_jacobian(self, fixture_name, request):
        problem = request.getfixturevalue(fixture_name)
        for seed in range(10):
            x = _interior_point(problem, seed)
            fd = _fd_jacobian(problem.equality_residuals, x, problem.n_eq)
            assert _max_rel(problem.equality_jacobian(x).toarray(), fd) < 1e-6

    def test_inequality_jacobian(self, fixture_name, request):
        problem = request.getfixturevalue(fixture_name)
        for seed in range(10):
            x = _interior_point(problem, seed)
            fd = _fd_jacobian(problem.inequality_residuals, x, problem.n_ineq)
            assert _max_rel(problem.inequality_jacobian(x).toarray(), fd) < 1e-6

    def test_lagrangian_hessian(self, fixture_name, request):
        problem = request.getfixturevalue(fixture_name)
        rng = np.random.default_rng(99)
        for seed in range(10):
            x = _interior_point(problem, seed)
            lam = rng.uniform(-2.0, 2.0, problem.n_eq)
            mu = rng.uniform(0.0, 2.0, problem.n_ineq)
            sigma = problem.objective_scale

            def lag_grad(xx):
                return (-sigma * problem.objective_gradient(xx)
                        + problem.equality_jacobian(xx).toarray().T @ lam
                        - problem.inequality_jacobian(xx).toarray().T @ mu)

            fd = _fd_jacobian(lag_grad, x, problem.n)
            H = problem.lagrangian_hessian(x, lam, mu).toarray()
            assert np.max(np.abs(H - H.T)) == 0.0
            assert _max_rel(H, 0.5 * (fd + fd.T)) < 1e-5


class TestResidualStructure:
    def test_balanced_state_zero_residual(self, single):
        # analytic single-pipe state: pure NG, flow phi, pressures consistent
        net = single.network
        sc = single.scaling
        pipe = net.pipes["P1"]
        phi = 3.0
        alpha = 1.25
        sigma = net.junctions["J1"].slack_pressure
        coeff = pipe.friction * pipe.length / (pipe.diameter * pipe.area**2)
        p2 = alpha * sigma
        p3 = math.sqrt(p2**2 - coeff * 136900.0 * phi**2)
        x = np.zeros(single.n)
        L = single.layout
        x[L[(VK_S_NG, "S1")]] = phi / sc.phi0
        x[L[(VK_S_H2, "S2")]] = 0.0
        x[L[(VK_D, "D1")]] = phi / sc.phi0
        x[L[(VK_ALPHA, "C1")]] = alpha
        x[L[(VK_PHI, "C1")]] = phi / sc.phi0
        x[L[(VK_PHI, "P1")]] = phi / sc.phi0
        x[L[(VK_PRESSURE, "J1")]] = sigma / sc.p0
        x[L[(VK_PRESSURE, "J2")]] = p2 / sc.p0
        x[L[(VK_PRESSURE, "J3")]] = p3 / sc.p0
        # gammas all zero (pure NG)
        r = single.equality_residuals(x)
        assert np.max(np.abs(r)) < 1e-12

    def test_supply_perturbation_touches_two_rows(self, single):
        x = _interior_point(single, 3)
        x[single.layout[(VK_GAMMA_NODE, "J1")]] = 0.0  # pure NG at the supply node
        base = single.equality_residuals(x)
        x2 = x.copy()
        delta = 0.01
        x2[single.layout[(VK_S_NG, "S1")]] += delta
        diff = single.equality_residuals(x2) - base
        ng_row = single.eq_index[("ng_balance", "J1")]
        h2_row = single.eq_index[("h2_balance", "J1")]
        assert diff[ng_row] == pytest.approx(-delta, rel=1e-12)
        assert diff[h2_row] == pytest.approx(0.0, abs=1e-15)
        others = [i for i in range(single.n_eq) if i not in (ng_row, h2_row)]
        assert np.max(np.abs(diff[others])) == 0.0

    def test_continuity_row_touches_two_variables(self, single):
        x = _interior_point(single, 4)
        J = single.equality_jacobian(x).toarray()
        for eid in ("P1", "C1"):
            row = single.eq_index[("continuity", eid)]
            assert np.count_nonzero(J[row]) == 2

    def test_total_mass_row_is_sum_of_species_rows(self, eight):
        # NG + H2 balance at a junction = net total mass balance there
        for seed in range(5):
            x = _interior_point(eight, seed)
            r = eight.equality_residuals(x)
            net = eight.network
            for jid in net.junction_ids:
                ng = r[eight.eq_index[("ng_balance", jid)]]
                h2 = r[eight.eq_index[("h2_balance", jid)]]
                incoming, outgoing, _ = net.incidence(jid)
                total = (sum(x[eight.layout[(VK_PHI, e)]] for e in outgoing)
                         - sum(x[eight.layout[(VK_PHI, e)]] for e in incoming))
                for gid in net.gnodes:
                    gn = net.gnodes[gid]
                    if gn.junction != jid:
                        continue
                    if gn.kind.value == "ng_supply":
                        total -= x[eight.layout[(VK_S_NG, gid)]]
                    elif gn.kind.value == "h2_supply":
                        total -= x[eight.layout[(VK_S_H2, gid)]]
                    else:
                        total += x[eight.layout[(VK_D, gid)]]
                assert ng + h2 == pytest.approx(total, rel=1e-10, abs=1e-12)


class TestInequalities:
    def test_pressure_min_active_at_bound(self):
        doc = {
            "format_version": 1,
            "junctions": {
                "J1": {"p_min": 1.0e6, "slack_pressure": 5.0e6, "gamma_max": 0.2},
                "J2": {"p_min": 3.0e6, "gamma_max": 0.2},
            },
            "pipes": {"P1": {"from": "J1", "to": "J2", "length": 1.0e4,
                             "diameter": 0.3, "friction": 0.01}},
            "compressors": {},
            "gnodes": {
                "S1": {"junction": "J1", "kind": "ng_supply",
                       "offer_price": 0.1, "s_max": 5.0},
                "D1": {"junction": "J2", "kind": "demand_optimized",
                       "energy_bid_price": 0.02, "g_max": 100.0},
            },
        }
        problem = assemble(network_from_dict(doc))
        x = initialize(problem)
        x[problem.layout[(VK_PRESSURE, "J2")]] = 3.0e6 / problem.scaling.p0
        row = problem.ineq_index[("pressure_min", "J2")]
        assert problem.inequality_residuals(x)[row] == pytest.approx(0.0, abs=1e-15)

    def test_energy_row_value(self, single):
        # d = 2 kg/s at gamma 0.1 against a 140 MJ/s cap: slack of
        # 140 - 2 * 53.96 = 32.08 MJ/s, divided by the energy row scale
        x = initialize(single)
        x[single.layout[(VK_D, "D1")]] = 2.0 / single.scaling.phi0
        x[single.layout[(VK_GAMMA_NODE, "J3")]] = 0.1
        row = single.ineq_index[("energy_max", "D1")]
        e0 = single.scaling.phi0 * single.gc.r_ng
        expected = (140.0 - 2.0 * 53.96) / e0
        got = single.inequality_residuals(x)[row]
        assert got == pytest.approx(expected, rel=1e-12)
        assert got * e0 == pytest.approx(32.08, rel=1e-12)

    def test_row_cover(self, eight):
        kinds = {}
        for kind, cid in eight.ineq_index:
            kinds.setdefault(kind, 0)
            kinds[kind] += 1
        assert kinds == {
            "pressure_min": 8, "conc_min": 8, "conc_max": 8,
            "discharge_max": 3, "boost_min": 3, "boost_max": 3,
            "ng_supply_min": 1, "ng_supply_max": 1,
            "h2_supply_min": 2, "h2_supply_max": 2,
            "energy_max": 2,
        }


class TestObjective:
    def test_zero_market(self, single):
        x = initialize(single)
        for col, (kind, _) in enumerate(single.layout.kinds):
            if kind in (VK_S_H2, VK_S_NG, VK_D, VK_PHI):
                x[col] = 0.0
            elif kind == VK_ALPHA:
                x[col] = 1.0
        assert single.objective(x) == pytest.approx(0.0, abs=1e-15)

    def test_pure_ng_delivery_value(self):
        # one slack junction, NG supply at 1 $/kg, delivery bid 0.1 $/MJ:
        # J = 0.1 * 44.2 * d - 1 * s at s = d = 1 kg/s is 3.42 $/s
        doc = {
            "format_version": 1,
            "junctions": {
                "J1": {"p_min": 1.0e6, "slack_pressure": 5.0e6, "gamma_max": 0.2},
                "J2": {"p_min": 1.0e6, "gamma_max": 0.2},
            },
            "pipes": {"P1": {"from": "J1", "to": "J2", "length": 1.0e4,
                             "diameter": 0.3, "friction": 0.01}},
            "compressors": {},
            "gnodes": {
                "S1": {"junction": "J1", "kind": "ng_supply",
                       "offer_price": 1.0, "s_max": 5.0},
                "D1": {"junction": "J2", "kind": "demand_optimized",
                       "energy_bid_price": 0.1, "g_max": 500.0},
            },
        }
        problem = assemble(network_from_dict(doc))
        x = np.zeros(problem.n)
        L = problem.layout
        x[L[(VK_S_NG, "S1")]] = 1.0 / problem.scaling.phi0
        x[L[(VK_D, "D1")]] = 1.0 / problem.scaling.phi0
        assert problem.objective(x) == pytest.approx(0.1 * 44.2 - 1.0, rel=1e-12)


class TestRescale:
    def test_round_trip(self, eight):
        for seed in range(5):
            x = _interior_point(eight, seed)
            physical = eight.rescale_solution(x)
            back = eight.scale_solution(physical)
            assert np.max(np.abs(back - x) / np.maximum(np.abs(x), 1e-300)) < 1e-15

    def test_pressure_unscaling(self, single):
        x = initialize(single)
        x[single.layout[(VK_PRESSURE, "J1")]] = 1.0
        physical = single.rescale_solution(x)
        assert physical[(VK_PRESSURE, "J1")] == pytest.approx(5.0e6, rel=1e-15)

    def test_flow_unscaling(self, single):
        x = initialize(single)
        x[single.layout[(VK_PHI, "P1")]] = 1.0
        physical = single.rescale_solution(x)
        sc = single.scaling
        assert physical[(VK_PHI, "P1")] == pytest.approx(
            sc.rho0 * sc.u0 * sc.area0, rel=1e-15)
        # default scales: rho0 = p0 / (a_ng * a_h2), u0 = ceil(a0)/300
        assert sc.phi0 == pytest.approx(
            (5.0e6 / (370.0 * 1090.0)) * (636.0 / 300.0) * 1.0, rel=1e-12)


def test_scaling_override_respected():
    net = load_network(bundled_network_path("single_pipe"))
    import dataclasses
    net2 = dataclasses.replace(net, scaling_overrides={"l0": 1000.0, "u0": 3.0})
    sc = default_scaling(net2)
    assert sc.l0 == 1000.0
    assert sc.u0 == 3.0
