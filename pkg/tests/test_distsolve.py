import numpy as np
import pytest

from sddmflow.chain import (build_exact_chain, chain_length,
                            parallel_e_solve, parallel_r_solve)
from sddmflow.distsolve import (assemble_system, comp0, comp1,
                                e_dist_r_solve, node_inputs_from_system,
                                r_dist_r_solve)
from sddmflow.errors import ConfigurationError, ParameterError
from sddmflow.graphs import (SplitMatrix, WeightedGraph,
                             default_ground_node, generate_random_network,
                             ground, laplacian, spectral_summary)
from sddmflow.harness import message_stats

import oracles


def _grounded(n, m, seed, weight_range=(1.0, 2.0)):
    inst = generate_random_network(n, m, seed, weight_range)
    return ground(laplacian(inst.graph),
                  default_ground_node(inst.graph))[0]


def _grounded_triangle():
    g = WeightedGraph.from_edges(3, [[0, 1], [1, 2], [0, 2]], [1, 1, 1])
    return ground(laplacian(g), 2)[0]


def _dense_rows(rows, n):
    out = np.zeros((n, n))
    for r in rows:
        out[r.owner, r.indices] = r.values
    return out


# -- power-row precomputation --------------------------------------------

def test_comp0_r1_returns_ad_rows():
    M = _grounded(8, 14, seed=0)
    res = comp0(node_inputs_from_system(M, np.zeros(M.n), 1, 1))
    D, A = oracles.split_dense(M.to_dense())
    assert np.allclose(_dense_rows(res.rows, M.n), A / D[None, :],
                       rtol=0, atol=0)


def test_comp0_two_node_laplacian_square():
    # unit-weight single edge: (A0 D0^{-1})^2 is the identity
    L = laplacian(WeightedGraph.from_edges(2, [[0, 1]], [1.0]))
    res = comp0(node_inputs_from_system(L, np.zeros(2), 1, 2))
    assert np.allclose(_dense_rows(res.rows, 2), np.eye(2))


@pytest.mark.parametrize("R", [1, 2, 4])
def test_comp_rows_match_dense_powers(R):
    for seed in range(3):
        M = _grounded(10, 20, seed=seed)
        D, A = oracles.split_dense(M.to_dense())
        inputs = node_inputs_from_system(M, np.zeros(M.n), 1, R)
        got0 = _dense_rows(comp0(inputs).rows, M.n)
        got1 = _dense_rows(comp1(inputs).rows, M.n)
        ref0 = oracles.dense_power(A / D[None, :], R)
        ref1 = oracles.dense_power(A / D[:, None], R)
        assert np.max(np.abs(got0 - ref0)) <= 1e-10
        assert np.max(np.abs(got1 - ref1)) <= 1e-10


def test_comp1_scaling_identity():
    # (D^{-1} A)^R = D^{-1} (A D^{-1})^R D, checked numerically
    M = _grounded(9, 16, seed=3)
    inputs = node_inputs_from_system(M, np.zeros(M.n), 1, 4)
    c0 = _dense_rows(comp0(inputs).rows, M.n)
    c1 = _dense_rows(comp1(inputs).rows, M.n)
    rebuilt = c0 * M.D[None, :] / M.D[:, None]
    assert np.max(np.abs(c1 - rebuilt)) <= 1e-12


# -- crude distributed solver --------------------------------------------

def test_rdist_diagonal_system():
    M = SplitMatrix.from_dense(np.diag([2.0, 5.0, 10.0]))
    b = np.array([4.0, 5.0, 30.0])
    res = r_dist_r_solve(node_inputs_from_system(M, b, 3, 1))
    assert np.array_equal(res.x, b / M.D)
    assert message_stats(res.transcript).total_messages == 0


def test_rdist_grounded_single_edge():
    M = SplitMatrix.from_dense(np.array([[1.0]]))
    res = r_dist_r_solve(node_inputs_from_system(M, np.array([1.0]), 2, 1))
    assert res.x == pytest.approx([1.0])


def test_rdist_matches_central_on_triangle():
    M = _grounded_triangle()
    d = chain_length(spectral_summary(M).kappa)
    chain = build_exact_chain(M, d)
    b = np.array([1.0, 0.0])
    ref = parallel_r_solve(chain, b)
    res = r_dist_r_solve(node_inputs_from_system(M, b, d, 1))
    assert np.max(np.abs(res.x - ref)) <= 1e-10


@pytest.mark.parametrize("R", [1, 2, 4])
def test_rdist_matches_central_across_radii(R):
    M = _grounded(12, 24, seed=7)
    d = chain_length(spectral_summary(M).kappa)
    chain = build_exact_chain(M, d)
    rng = np.random.default_rng(1)
    b = rng.normal(size=M.n)
    ref = parallel_r_solve(chain, b)
    res = r_dist_r_solve(node_inputs_from_system(M, b, d, R))
    assert np.max(np.abs(res.x - ref)) <= 1e-10


def test_rdist_bitwise_equal_central_at_r1():
    M = _grounded(15, 30, seed=8)
    d = chain_length(spectral_summary(M).kappa)
    chain = build_exact_chain(M, d)
    rng = np.random.default_rng(2)
    b = rng.normal(size=M.n)
    assert np.array_equal(parallel_r_solve(chain, b),
                          r_dist_r_solve(
                              node_inputs_from_system(M, b, d, 1)).x)


# -- exact distributed solver --------------------------------------------

def test_edist_diagonal_converges_first_sweep():
    M = SplitMatrix.from_dense(np.diag([2.0, 4.0]))
    res = e_dist_r_solve(node_inputs_from_system(M, np.array([2.0, 8.0]),
                                                 2, 1, 0.5))
    assert res.q == 1
    assert np.array_equal(res.x, [1.0, 2.0])


def test_edist_triangle_meets_mnorm_contract():
    M = _grounded_triangle()
    d = chain_length(spectral_summary(M).kappa)
    b = np.array([1.0, 0.0])
    res = e_dist_r_solve(node_inputs_from_system(M, b, d, 1, 1e-6))
    Md = M.to_dense()
    x_star = np.linalg.solve(Md, b)
    assert oracles.mnorm(Md, res.x - x_star) \
        <= 1e-6 * oracles.mnorm(Md, x_star)


def test_edist_matches_central_30_nodes():
    inst = generate_random_network(30, 60, seed=9)
    M, _ = ground(laplacian(inst.graph), default_ground_node(inst.graph))
    d = chain_length(spectral_summary(M).kappa)
    chain = build_exact_chain(M, d)
    rng = np.random.default_rng(3)
    b = rng.normal(size=M.n)
    ref = parallel_e_solve(chain, b, 1e-4)
    res = e_dist_r_solve(node_inputs_from_system(M, b, d, 1, 1e-4))
    assert res.q == ref.q
    assert np.max(np.abs(res.x - ref.x)) <= 1e-9


def test_edist_r2_matches_central():
    M = _grounded(14, 28, seed=10)
    d = chain_length(spectral_summary(M).kappa)
    chain = build_exact_chain(M, d)
    rng = np.random.default_rng(4)
    b = rng.normal(size=M.n)
    ref = parallel_e_solve(chain, b, 1e-5)
    res = e_dist_r_solve(node_inputs_from_system(M, b, d, 2, 1e-5))
    assert np.max(np.abs(res.x - ref.x)) <= 1e-9


# -- validation and cost shape -------------------------------------------

def test_inconsistent_configuration_rejected():
    M = _grounded_triangle()
    inputs = node_inputs_from_system(M, np.ones(M.n), 3, 1)
    bad = list(inputs)
    bad[1] = bad[1].__class__(**{**bad[1].__dict__, "d": 4})
    with pytest.raises(ConfigurationError):
        assemble_system(bad)


def test_non_power_of_two_radius_rejected():
    M = _grounded_triangle()
    with pytest.raises(ParameterError):
        r_dist_r_solve(node_inputs_from_system(M, np.ones(M.n), 3, 3))


def test_messages_linear_in_chain_depth():
    # fixed graph and R: crude-solve messages grow affinely in 2^d
    M = _grounded(10, 18, seed=11)
    b = np.ones(M.n)
    ds = [3, 4, 5, 6, 7]
    msgs = []
    for d in ds:
        res = r_dist_r_solve(node_inputs_from_system(M, b, d, 1))
        msgs.append(message_stats(res.transcript).total_messages)
    x = np.array([2.0 ** d for d in ds])
    y = np.array(msgs, float)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r2 = 1 - ((y - A @ coef) ** 2).sum() / ((y - y.mean()) ** 2).sum()
    assert r2 >= 0.999
    # doubling d roughly doubles the forward-phase traffic
    fwd = [message_stats(r_dist_r_solve(
        node_inputs_from_system(M, b, d, 1)).transcript)
        .breakdown_messages["forward"] for d in (5, 6)]
    assert 1.8 <= fwd[1] / fwd[0] <= 2.2


def test_comp_cost_grows_with_radius():
    M = _grounded(12, 30, seed=12)
    b = np.ones(M.n)
    comp_msgs = []
    for R in (1, 2, 4):
        res = r_dist_r_solve(node_inputs_from_system(M, b, 5, R))
        comp_msgs.append(
            message_stats(res.transcript).breakdown_messages["comp"])
    assert comp_msgs[0] < comp_msgs[1] < comp_msgs[2]
