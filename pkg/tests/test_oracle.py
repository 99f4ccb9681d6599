"""Centralized reference solvers: self-consistency and known solutions."""

import numpy as np
import pytest

from dipm.errors import FactorizationError, InfeasibleStartError
from dipm.generator import random_qp
from dipm.oracle import (
    assemble_dense,
    assemble_lifted,
    centralized_ipm,
    centralized_newton,
    direct_direction,
)
from dipm.problem import (
    AgentBlock,
    LooselyCoupledProblem,
    QuadraticFunction,
    build_coupling,
    scatter,
)


def chain_qp():
    b1 = AgentBlock(index_set=(0, 1), objective=QuadraticFunction(np.eye(2), np.zeros(2)))
    b2 = AgentBlock(
        index_set=(1, 2), objective=QuadraticFunction(np.eye(2), np.array([-1.0, -1.0]), 1.0)
    )
    return LooselyCoupledProblem(n=3, blocks=(b1, b2))


class TestCentralizedNewton:
    def test_unconstrained_quadratic_one_step(self):
        rng = np.random.default_rng(0)
        H = np.diag(rng.uniform(1.0, 3.0, size=4))
        q = rng.standard_normal(4)
        blk = AgentBlock(index_set=(0, 1, 2, 3), objective=QuadraticFunction(H, q))
        dense = assemble_dense(LooselyCoupledProblem(n=4, blocks=(blk,)))
        x = centralized_newton(dense, np.zeros(4))
        np.testing.assert_allclose(x, np.linalg.solve(H, -q), atol=1e-10)

    def test_chain_qp_minimizer(self):
        dense = assemble_dense(chain_qp())
        x = centralized_newton(dense, np.zeros(3))
        np.testing.assert_allclose(x, [0.0, 0.5, 1.0], atol=1e-10)

    def test_equality_keeps_null_space_steps(self):
        rng = np.random.default_rng(1)
        P = np.diag(rng.uniform(0.5, 2.0, size=3))
        blk = AgentBlock(
            index_set=(0, 1, 2),
            objective=QuadraticFunction(P, rng.standard_normal(3)),
            A_eq=np.array([[1.0, 1.0, 0.0]]),
            b_eq=np.zeros(1),
        )
        dense = assemble_dense(LooselyCoupledProblem(n=3, blocks=(blk,)))
        x = centralized_newton(dense, np.zeros(3))
        assert abs(x[0] + x[1]) <= 1e-10

    def test_infeasible_equality_start_rejected(self):
        blk = AgentBlock(
            index_set=(0, 1),
            objective=QuadraticFunction(np.eye(2), np.zeros(2)),
            A_eq=np.array([[1.0, 0.0]]),
            b_eq=np.ones(1),
        )
        dense = assemble_dense(LooselyCoupledProblem(n=2, blocks=(blk,)))
        with pytest.raises(InfeasibleStartError):
            centralized_newton(dense, np.zeros(2))

    def test_lifted_and_reduced_forms_agree(self):
        for seed in (0, 3, 8):
            prob, x0 = random_qp(seed, n_agents=3, block_size=3, overlap=1)
            dense = assemble_dense(prob)
            x_red = centralized_newton(dense, x0, eps_nt=1e-12)
            lifted, offsets = assemble_lifted(prob)
            coupling = build_coupling(prob)
            y0 = np.concatenate(scatter(x0, coupling) + [x0])
            y = centralized_newton(lifted, y0, eps_nt=1e-12)
            x_lift = y[offsets[-1]:]
            np.testing.assert_allclose(x_lift, x_red, atol=1e-8)


class TestCentralizedIpm:
    def test_one_d_analytic(self):
        blk = AgentBlock(
            index_set=(0,),
            objective=QuadraticFunction(np.zeros((1, 1)), np.ones(1)),
            inequality=(QuadraticFunction(np.zeros((1, 1)), -np.ones(1), 1.0),),
        )
        dense = assemble_dense(LooselyCoupledProblem(n=1, blocks=(blk,)))
        x = centralized_ipm(dense, np.array([3.0]), eps_p=1e-6)
        assert abs(x[0] - 1.0) <= 1e-6

    def test_random_qp_kkt_verification(self):
        # verify stationarity with the barrier multipliers at the returned
        # point: grad F + sum lambda_i grad g_i + A' nu = 0 approximately
        for seed in (2, 5):
            prob, x0 = random_qp(seed, n_agents=3, block_size=3, overlap=1,
                                 n_ineq=1, n_eq=1)
            dense = assemble_dense(prob)
            t_final_holder = {}
            x = centralized_ipm(dense, x0, eps_p=1e-8, eps_nt=1e-10)
            m = len(dense.inequalities)
            t_final = 1.0
            while m / t_final >= 1e-8:
                t_final *= 10.0
            lam = np.array([-1.0 / (t_final * gv(x)) for gv, _, _ in dense.inequalities])
            assert np.all(lam >= 0)
            stat = dense.gradient(x)
            for (gv, gg, _), l in zip(dense.inequalities, lam):
                stat = stat + l * gg(x)
            if dense.A is not None:
                nu, *_ = np.linalg.lstsq(dense.A.T, -stat, rcond=None)
                stat = stat + dense.A.T @ nu
            assert np.abs(stat).max() <= 1e-5 * (1.0 + np.abs(dense.gradient(x)).max())
            # primal feasibility
            assert all(gv(x) < 0 for gv, _, _ in dense.inequalities)
            if dense.A is not None:
                assert np.abs(dense.A @ x - dense.b).max() <= 1e-8

    def test_infeasible_start_rejected(self):
        blk = AgentBlock(
            index_set=(0,),
            objective=QuadraticFunction(np.zeros((1, 1)), np.ones(1)),
            inequality=(QuadraticFunction(np.zeros((1, 1)), -np.ones(1), 1.0),),
        )
        dense = assemble_dense(LooselyCoupledProblem(n=1, blocks=(blk,)))
        with pytest.raises(InfeasibleStartError):
            centralized_ipm(dense, np.array([0.0]))


class TestDirectDirection:
    def test_chain_qp_direction(self):
        prob = chain_qp()
        coupling = build_coupling(prob)
        ds, dx = direct_direction(prob, scatter(np.zeros(3), coupling), coupling)
        np.testing.assert_allclose(dx, [0.0, 0.5, 1.0], atol=1e-12)
        for i, idx in enumerate(coupling.index_arrays):
            np.testing.assert_array_equal(ds[i], dx[idx])

    def test_decoupled_blocks_reduce_to_local_newton(self):
        rng = np.random.default_rng(2)
        blocks = []
        for i in range(3):
            P = np.diag(rng.uniform(0.5, 2.0, size=2))
            blocks.append(AgentBlock(index_set=(2 * i, 2 * i + 1),
                                     objective=QuadraticFunction(P, rng.standard_normal(2))))
        prob = LooselyCoupledProblem(n=6, blocks=tuple(blocks))
        coupling = build_coupling(prob)
        s = scatter(np.zeros(6), coupling)
        ds, dx = direct_direction(prob, s, coupling)
        for blk, d in zip(prob.blocks, ds):
            local = np.linalg.solve(blk.objective.hessian(np.zeros(2)),
                                    -blk.objective.gradient(np.zeros(2)))
            np.testing.assert_allclose(d, local, atol=1e-12)

    def test_first_order_optimality_residual(self):
        for seed in range(5):
            prob, x0 = random_qp(seed, n_agents=4, block_size=3, overlap=1)
            coupling = build_coupling(prob)
            s = scatter(x0, coupling)
            _, dx = direct_direction(prob, s, coupling)
            H = np.zeros((prob.n, prob.n))
            g = np.zeros(prob.n)
            for blk, sl in zip(prob.blocks, s):
                idx = np.asarray(blk.index_set)
                H[np.ix_(idx, idx)] += blk.objective.hessian(sl)
                g[idx] += blk.objective.gradient(sl)
            assert np.abs(H @ dx + g).max() <= 1e-10 * (1.0 + np.abs(g).max())

    def test_singular_reduced_hessian_raises(self):
        blk = AgentBlock(index_set=(0, 1),
                         objective=QuadraticFunction(np.diag([1.0, 0.0]), np.zeros(2)))
        prob = LooselyCoupledProblem(n=2, blocks=(blk,))
        coupling = build_coupling(prob)
        with pytest.raises(FactorizationError):
            direct_direction(prob, scatter(np.zeros(2), coupling), coupling)
