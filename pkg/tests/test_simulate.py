"""Steady-state simulation: analytic checks, conservation, cross-checks."""

import math

import numpy as np
import pytest

from blendflow import (ControlAssignment, NegativePressure, SimulationError,
                       SolverOptions, assemble, bundled_network_path,
                       crosscheck, load_network, simulate, solve)
from blendflow.scaling import default_scaling


@pytest.fixture(scope="module")
def single_pipe():
    return load_network(bundled_network_path("single_pipe"))


@pytest.fixture(scope="module")
def eight_node():
    return load_network(bundled_network_path("eight_node"))


def _conservation(network, controls, state, tol=1e-10):
    scaling = default_scaling(network)
    total_in = sum(controls.s_ng.values()) + sum(controls.s_h2.values())
    total_out = sum(controls.d.values())
    makeup = sum(state.makeup.values())
    assert abs(total_in - total_out - makeup) / scaling.phi0 < tol
    h2_in = sum(controls.s_h2.values())
    h2_out = sum(network.gnodes[g].junction and
                 state.gamma_node[network.gnodes[g].junction] * d
                 for g, d in controls.d.items())
    h2_makeup = sum(state.gamma_node[j] * w for j, w in state.makeup.items())
    assert abs(h2_in - h2_out - h2_makeup) / scaling.phi0 < tol


class TestZeroControls:
    def test_flat_pressures_zero_flows(self, single_pipe):
        state = simulate(single_pipe, ControlAssignment())
        sigma = single_pipe.junctions["J1"].slack_pressure
        for j in single_pipe.junction_ids:
            assert state.pressures[j] == pytest.approx(sigma, rel=1e-12)
        for e in state.flows:
            assert state.flows[e] == pytest.approx(0.0, abs=1e-9)


class TestAnalyticSinglePipe:
    def test_pressure_formula(self, single_pipe):
        # pure NG throughput: the receiving pressure follows the closed-form
        # single-pipe relation through the boost and the pipe drop
        pipe = single_pipe.pipes["P1"]
        sigma = single_pipe.junctions["J1"].slack_pressure
        coeff = pipe.friction * pipe.length / (pipe.diameter * pipe.area**2)
        for s, alpha in ((1.0, 1.0), (2.5, 1.2), (3.2, 1.38)):
            controls = ControlAssignment(s_ng={"S1": s}, d={"D1": s},
                                         alpha={"C1": alpha})
            state = simulate(single_pipe, controls)
            expected = math.sqrt((alpha * sigma)**2 - coeff * 136900.0 * s**2)
            assert state.pressures["J3"] == pytest.approx(expected, rel=1e-10)
            assert state.pressures["J2"] == pytest.approx(alpha * sigma, rel=1e-12)
            _conservation(single_pipe, controls, state)

    def test_throughput_monotonically_lowers_pressure(self, single_pipe):
        last = float("inf")
        for s in np.linspace(0.5, 3.2, 8):
            controls = ControlAssignment(s_ng={"S1": float(s)},
                                         d={"D1": float(s)}, alpha={"C1": 1.3})
            state = simulate(single_pipe, controls)
            assert state.pressures["J3"] < last
            last = state.pressures["J3"]


class TestMixing:
    def test_junction_mixes_flow_weighted(self, eight_node):
        # hydrogen enters only on the second branch (S3 at J6): the shared
        # junction J5 must carry the flow-weighted mass fraction of its
        # two incoming pipes
        controls = ControlAssignment(
            s_ng={"S1": 6.0}, s_h2={"S2": 0.0, "S3": 0.2},
            d={"D1": 2.5, "D2": 2.0, "D3": 1.5},
            alpha={"C1": 1.05, "C2": 1.15, "C3": 1.2},
        )
        state = simulate(eight_node, controls)
        phi3, phi5 = state.flows["P3"], state.flows["P5"]
        g3, g5 = state.gamma_edge["P3"], state.gamma_edge["P5"]
        mixed = (g3 * phi3 + g5 * phi5) / (phi3 + phi5)
        assert state.gamma_node["J5"] == pytest.approx(mixed, rel=1e-9)
        assert state.gamma_node["J3"] == pytest.approx(0.0, abs=1e-9)
        assert g5 > 0.01
        _conservation(eight_node, controls, state)

    def test_gamma_physical_range(self, eight_node):
        controls = ControlAssignment(
            s_ng={"S1": 2.6}, s_h2={"S2": 0.15, "S3": 0.15},
            d={"D1": 1.2, "D2": 1.0, "D3": 0.8},
            alpha={"C1": 1.15, "C2": 1.25, "C3": 1.25},
        )
        state = simulate(eight_node, controls)
        for j, gamma in state.gamma_node.items():
            assert -1e-12 <= gamma <= 1.0 + 1e-12


class TestMakeup:
    def test_slack_absorbs_imbalance(self, single_pipe):
        controls = ControlAssignment(s_ng={"S1": 2.0}, d={"D1": 1.5},
                                     alpha={"C1": 1.1})
        state = simulate(single_pipe, controls)
        assert state.makeup["J1"] == pytest.approx(0.5, rel=1e-9)
        _conservation(single_pipe, controls, state)

    def test_slack_supplies_deficit(self, single_pipe):
        controls = ControlAssignment(s_ng={"S1": 1.0}, d={"D1": 2.0},
                                     alpha={"C1": 1.2})
        state = simulate(single_pipe, controls)
        assert state.makeup["J1"] == pytest.approx(-1.0, rel=1e-9)


class TestFailures:
    def test_excessive_throughput_reports_pressure_loss(self, single_pipe):
        controls = ControlAssignment(s_ng={"S1": 9.0}, d={"D1": 9.0},
                                     alpha={"C1": 1.0})
        with pytest.raises((NegativePressure, SimulationError)):
            simulate(single_pipe, controls)

    def test_bad_controls_rejected(self, single_pipe):
        with pytest.raises(SimulationError):
            simulate(single_pipe, ControlAssignment(alpha={"C1": 0.8}))
        with pytest.raises(SimulationError):
            simulate(single_pipe, ControlAssignment(s_ng={"NOPE": 1.0}))
        with pytest.raises(SimulationError):
            simulate(single_pipe, ControlAssignment(d={"D1": -1.0}))


class TestCrosscheck:
    @pytest.mark.parametrize("name", ["single_pipe", "eight_node"])
    def test_optimal_solutions_pass(self, name):
        net = load_network(bundled_network_path(name))
        sol = solve(assemble(net), SolverOptions(seed_count=2))
        report = crosscheck(sol, net)
        assert report.passed
        assert report.max_deviation <= 1e-6

    def test_corrupted_solution_fails_with_name(self, single_pipe):
        from blendflow.nlp import VK_PRESSURE
        sol = solve(assemble(single_pipe), SolverOptions(seed_count=2))
        sol.primal[(VK_PRESSURE, "J2")] *= 1.01
        report = crosscheck(sol, single_pipe)
        assert not report.passed
        assert report.worst == "pressure:J2"

    def test_requires_optimal_status(self, single_pipe):
        import dataclasses
        from blendflow import SolverStatus
        sol = solve(assemble(single_pipe), SolverOptions(seed_count=2))
        bad = dataclasses.replace(sol, status=SolverStatus.INFEASIBLE)
        with pytest.raises(SimulationError):
            crosscheck(bad, single_pipe)
