"""Transportation simplex, potentials, conic LP closed form."""

import numpy as np
import pytest
from scipy.optimize import linprog

from abconvex import (
    ConicLP,
    TransportProblem,
    c_transform,
    conic_lp_dual,
    coupling_check,
    kantorovich_gap_report,
    solve_transport,
)
from abconvex.errors import Unbalanced
from abconvex.transport import dual_objective

from conftest import random_transport, transport_vertex_oracle


class TestProblemValidation:
    def test_unbalanced_rejected(self):
        with pytest.raises(Unbalanced):
            TransportProblem(cost=[[1.0]], mu=[1.0], nu=[2.0])

    def test_negative_marginal_rejected(self):
        with pytest.raises(ValueError):
            TransportProblem(cost=[[1.0, 1.0]], mu=[1.0], nu=[2.0, -1.0])

    def test_infinite_cost_rejected(self):
        with pytest.raises(ValueError):
            TransportProblem(cost=[[np.inf]], mu=[1.0], nu=[1.0])


class TestSolveTransport:
    def test_zero_cost_matching(self):
        prob = TransportProblem(cost=[[0.0, 1.0], [1.0, 0.0]],
                                mu=[0.5, 0.5], nu=[0.5, 0.5])
        coupling, pots, value = solve_transport(prob)
        assert value == 0.0
        assert np.allclose(coupling.q, np.diag([0.5, 0.5]))
        assert dual_objective(pots.psi, pots.phi, prob.mu, prob.nu) == 0.0

    def test_forced_off_diagonal(self):
        prob = TransportProblem(cost=[[0.0, 1.0], [1.0, 0.0]],
                                mu=[1.0, 0.0], nu=[0.0, 1.0])
        coupling, pots, value = solve_transport(prob)
        assert value == 1.0
        assert coupling.q[0, 1] == 1.0
        assert pots.psi[0] + pots.phi[1] == 1.0

    def test_equal_marginals_on_a_line(self):
        xs = np.array([0.0, 1.0, 2.0])
        cost = np.abs(xs[:, None] - xs[None, :])
        prob = TransportProblem(cost=cost, mu=np.ones(3) / 3, nu=np.ones(3) / 3)
        _, _, value = solve_transport(prob)
        assert abs(value) <= 1e-12

    def test_single_cell(self):
        prob = TransportProblem(cost=[[7.0]], mu=[2.0], nu=[2.0])
        coupling, pots, value = solve_transport(prob)
        assert value == 14.0 and coupling.q[0, 0] == 2.0

    def test_feasibility_and_duality_random(self):
        rng = np.random.default_rng(51)
        for _ in range(50):
            prob = random_transport(rng, max_n=12, max_m=12)
            coupling, pots, value = solve_transport(prob)
            assert coupling_check(coupling.q, prob.mu, prob.nu)
            slack = prob.cost - pots.psi[:, None] - pots.phi[None, :]
            assert slack.min() >= -1e-9
            assert abs(dual_objective(pots.psi, pots.phi, prob.mu, prob.nu)
                       - value) <= 1e-6

    def test_degenerate_marginals(self):
        # many zero masses force degenerate pivots
        prob = TransportProblem(
            cost=[[3.0, 1.0, 4.0], [1.0, 5.0, 9.0], [2.0, 6.0, 5.0]],
            mu=[1.0, 0.0, 0.0], nu=[0.0, 1.0, 0.0])
        coupling, pots, value = solve_transport(prob)
        assert value == 1.0 and coupling.q[0, 1] == 1.0

    def test_matches_vertex_oracle_small(self):
        rng = np.random.default_rng(52)
        for _ in range(40):
            prob = random_transport(rng, max_n=3, max_m=3)
            _, _, value = solve_transport(prob)
            oracle = transport_vertex_oracle(prob.cost, prob.mu, prob.nu)
            assert abs(value - oracle) <= 1e-9


class TestCTransform:
    def test_identity_cost(self):
        cost = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert np.array_equal(c_transform(np.zeros(2), cost), np.zeros(2))

    def test_shifted(self):
        cost = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert np.array_equal(c_transform(np.array([1.0, 0.0]), cost),
                              np.array([-1.0, 0.0]))

    def test_never_decreases_dual_objective(self):
        rng = np.random.default_rng(53)
        for _ in range(100):
            prob = random_transport(rng, max_n=10, max_m=10)
            psi = rng.normal(size=prob.shape[0])
            phi0 = c_transform(psi, prob.cost)          # feasible by construction
            obj0 = dual_objective(psi, phi0, prob.mu, prob.nu)
            # any feasible phi is dominated by the transform
            phi_feas = phi0 - np.abs(rng.normal(size=prob.shape[1]))
            obj_feas = dual_objective(psi, phi_feas, prob.mu, prob.nu)
            assert obj_feas <= obj0 + 1e-12

    def test_two_sweeps_reach_fixed_point(self):
        rng = np.random.default_rng(54)
        for _ in range(100):
            prob = random_transport(rng, max_n=10, max_m=10)
            psi = rng.normal(size=prob.shape[0])
            phi1 = c_transform(psi, prob.cost)
            psi1 = c_transform(phi1, prob.cost.T)
            phi2 = c_transform(psi1, prob.cost)
            psi2 = c_transform(phi2, prob.cost.T)
            assert np.array_equal(phi2, phi1)
            assert np.array_equal(psi2, psi1)

    def test_transform_output_feasible_exactly(self):
        rng = np.random.default_rng(63)
        for _ in range(100):
            prob = random_transport(rng, max_n=10, max_m=10)
            psi = rng.normal(size=prob.shape[0])
            phi = c_transform(psi, prob.cost)
            assert (psi[:, None] + phi[None, :] <= prob.cost).all()

    def test_optimal_potentials_already_tight(self):
        rng = np.random.default_rng(55)
        for _ in range(30):
            prob = random_transport(rng, max_n=8, max_m=8)
            _, pots, _ = solve_transport(prob)
            phi_t = c_transform(pots.psi, prob.cost)
            obj = dual_objective(pots.psi, pots.phi, prob.mu, prob.nu)
            obj_t = dual_objective(pots.psi, phi_t, prob.mu, prob.nu)
            assert obj <= obj_t + 1e-12
            assert abs(obj_t - obj) <= 1e-6


class TestWeakDuality:
    def test_feasible_pairs_random(self):
        rng = np.random.default_rng(56)
        for _ in range(100):
            prob = random_transport(rng, max_n=8, max_m=8)
            psi = rng.normal(size=prob.shape[0])
            phi = c_transform(psi, prob.cost)
            total = prob.mu.sum()
            q = np.outer(prob.mu, prob.nu) / total   # independent coupling
            assert coupling_check(q, prob.mu, prob.nu)
            assert (dual_objective(psi, phi, prob.mu, prob.nu)
                    <= float((q * prob.cost).sum()) + 1e-9)


class TestMonotoneMatching:
    def test_sorted_line_closed_form(self):
        rng = np.random.default_rng(57)
        for _ in range(30):
            n = int(rng.integers(2, 12))
            xs = np.sort(rng.normal(size=n))
            ys = np.sort(rng.normal(size=n))
            cost = np.abs(xs[:, None] - ys[None, :])
            prob = TransportProblem(cost=cost, mu=np.ones(n) / n, nu=np.ones(n) / n)
            _, _, value = solve_transport(prob)
            expect = float(np.abs(xs - ys).sum() / n)
            assert abs(value - expect) <= 1e-9


class TestKantorovichReport:
    def test_small_instances(self):
        rng = np.random.default_rng(58)
        for _ in range(40):
            prob = random_transport(rng, max_n=10, max_m=10)
            rep = kantorovich_gap_report(prob)
            assert rep.gap <= 1e-6
            assert rep.slack_violations == 0

    def test_forced_instance_values(self):
        rep = kantorovich_gap_report(
            TransportProblem(cost=[[0.0, 1.0], [1.0, 0.0]],
                             mu=[1.0, 0.0], nu=[0.0, 1.0]))
        assert rep.primal == 1.0 and rep.dual == 1.0

    def test_single_cell_report(self):
        rep = kantorovich_gap_report(
            TransportProblem(cost=[[7.0]], mu=[2.0], nu=[2.0]))
        assert rep.gap == 0.0 and rep.dual == 14.0  # mu_1 * c_11


class TestCouplingCheck:
    def setup_method(self):
        self.mu = np.array([0.5, 0.5])
        self.nu = np.array([0.5, 0.5])

    def test_identity_ok(self):
        q = np.diag([0.5, 0.5])
        psi, phi = np.array([1.0, -1.0]), np.array([0.0, 2.0])
        # marginal pairing identity for feasible couplings
        assert coupling_check(q, self.mu, self.nu, [(psi, phi)])

    def test_negative_entry(self):
        q = np.array([[0.6, -0.1], [-0.1, 0.6]])
        assert not coupling_check(q, self.mu, self.nu)

    def test_mass_right_rows_wrong(self):
        q = np.array([[0.25, 0.5], [0.25, 0.0]])
        assert not coupling_check(q, self.mu, self.nu)

    def test_submarginal_inequality(self):
        # nonnegative q with sub-marginals pairs below the marginal pairing
        # for nonnegative test functions
        rng = np.random.default_rng(59)
        for _ in range(50):
            n, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            mu = rng.uniform(0.1, 1.0, n)
            nu = rng.uniform(0.1, 1.0, m)
            nu *= mu.sum() / nu.sum()
            q = np.outer(mu, nu) / mu.sum()
            q = q * rng.uniform(0.0, 1.0)    # scale down: sub-marginal
            psi = rng.uniform(0.0, 2.0, n)
            phi = rng.uniform(0.0, 2.0, m)
            lhs = float(psi @ mu + phi @ nu)
            rhs = float((q * (psi[:, None] + phi[None, :])).sum())
            assert lhs >= rhs - 1e-12


class TestConicLP:
    def test_worked_example(self):
        rep = conic_lp_dual(ConicLP(pi=[1.0, 2.0], c_vec=[3.0, 4.0]))
        assert rep.primal == 11.0 and rep.dual == 11.0
        assert np.array_equal(rep.q_star, [1.0, 2.0])

    def test_negative_component_unbounded(self):
        rep = conic_lp_dual(ConicLP(pi=[1.0, -0.5], c_vec=[0.0, 0.0]))
        assert rep.primal.is_minus_inf and rep.dual.is_minus_inf
        assert rep.q_star is None

    def test_zero_pi(self):
        rep = conic_lp_dual(ConicLP(pi=[0.0, 0.0], c_vec=[5.0, -5.0]))
        assert rep.primal == 0.0 and np.array_equal(rep.q_star, [0.0, 0.0])

    def test_against_lp_oracle(self):
        rng = np.random.default_rng(60)
        for _ in range(60):
            n = int(rng.integers(1, 9))
            pi = rng.normal(size=n)
            if rng.random() < 0.5:
                pi = np.abs(pi)
            c = rng.normal(size=n)
            rep = conic_lp_dual(ConicLP(pi=pi, c_vec=c))
            res = linprog(c=pi, bounds=[(ci, None) for ci in c], method="highs")
            if (pi >= 0).all():
                assert res.status == 0
                assert abs(rep.primal.as_float() - res.fun) <= 1e-9
            else:
                assert res.status == 3  # unbounded
                assert rep.primal.is_minus_inf
