"""Quick small-instance invariant checks behind the `verify` subcommand.

These are smoke-level versions of the oracle suite: each check either passes
or names what broke. The full suite lives in tests/.
"""

import numpy as np
import scipy.linalg

from .chain import build_exact_chain, chain_length, parallel_e_solve, verify_chain
from .distsolve import e_dist_r_solve, node_inputs_from_system
from .graphs import (default_ground_node, generate_random_network, ground,
                     is_sddm, laplacian, spectral_summary)
from .netflow import dual_gradient, dual_value
from .experiment import ExperimentConfig, build_problem


def _check_laplacian_sddm(seed):
    inst = generate_random_network(12, 20, seed)
    L = laplacian(inst.graph)
    rep = is_sddm(L)
    return rep.ok, "laplacian passes the SDDM check"


def _check_grounded_solve(seed):
    inst = generate_random_network(10, 16, seed)
    L = laplacian(inst.graph)
    M, gmap = ground(L, default_ground_node(inst.graph))
    rng = np.random.default_rng(seed)
    b = rng.normal(size=M.n)
    kappa = spectral_summary(M, "exact").kappa
    chain = build_exact_chain(M, chain_length(kappa))
    res = parallel_e_solve(chain, b, 1e-8)
    x_star = scipy.linalg.solve(M.to_dense(), b)
    err = np.sqrt((res.x - x_star) @ M.matvec(res.x - x_star))
    ref = np.sqrt(x_star @ M.matvec(x_star))
    return err <= 1e-8 * ref, "chain solver meets its precision contract"


def _check_dist_matches_central(seed):
    inst = generate_random_network(9, 14, seed)
    L = laplacian(inst.graph)
    M, _ = ground(L, default_ground_node(inst.graph))
    rng = np.random.default_rng(seed + 1)
    b = rng.normal(size=M.n)
    kappa = spectral_summary(M, "exact").kappa
    d = chain_length(kappa)
    chain = build_exact_chain(M, d)
    central = parallel_e_solve(chain, b, 1e-6)
    dist = e_dist_r_solve(node_inputs_from_system(M, b, d, 1, 1e-6))
    same = np.max(np.abs(central.x - dist.x)) <= 1e-9
    return same and central.q == dist.q, \
        "distributed solve matches the centralized reference"


def _check_chain_budget(seed):
    inst = generate_random_network(8, 13, seed)
    M, _ = ground(laplacian(inst.graph), 0)
    kappa = spectral_summary(M, "exact").kappa
    chain = build_exact_chain(M, chain_length(kappa))
    ver = verify_chain(chain)
    return ver.ok and ver.measured[-1] < np.log(2.0) / 3.0, \
        "chain budget stays below (1/3) ln 2"


def _check_dual_gradient(seed):
    cfg = ExperimentConfig(n=8, m=12, seed=seed, cost_kind="smoothed",
                           gamma=1.0, Gamma=2.0)
    _, problem = build_problem(cfg)
    rng = np.random.default_rng(seed + 2)
    lam = rng.normal(size=problem.n)
    g = dual_gradient(problem, lam)
    h = 1e-5
    fd = np.zeros_like(g)
    for i in range(problem.n):
        e = np.zeros_like(lam)
        e[i] = h
        fd[i] = (dual_value(problem, lam + e)
                 - dual_value(problem, lam - e)) / (2 * h)
    rel = np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-30)
    return rel <= 1e-6, "dual gradient matches finite differences"


CHECKS = (_check_laplacian_sddm, _check_grounded_solve,
          _check_dist_matches_central, _check_chain_budget,
          _check_dual_gradient)


def run_selfcheck(seed=0, echo=print):
    ok_all = True
    for fn in CHECKS:
        ok, label = fn(seed)
        ok_all &= ok
        if echo:
            echo(f"{'PASS' if ok else 'FAIL'}  {label}")
    return ok_all
