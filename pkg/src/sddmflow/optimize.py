"""Dual descent loops: gradient, exact Newton, chain-solver Newton, and the
truncated-Neumann baseline, plus the convergence-phase analytics.

The dual being minimized is convex (see netflow); every method iterates
lambda <- lambda + alpha * direction with direction = -g for the gradient
method and an (approximate) solution of H d = -g otherwise. The
chain-solver direction grounds the dual Hessian at a fixed node, solves the
nonsingular system to relative precision eps in the H-norm, and shifts the
embedded solution to mean zero, which reproduces the pseudoinverse direction
on the constant-orthogonal subspace.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .chain import build_exact_chain, chain_length, parallel_e_solve
from .distsolve import e_dist_r_solve, node_inputs_from_system
from .errors import NumericalError, ParameterError
from .graphs import DENSE_ORACLE_CAP, default_ground_node, ground, spectral_summary
from .harness import message_stats
from .netflow import (dual_gradient, dual_hessian, dual_value, feasibility,
                      laplacian_seminorm, lipschitz_constant_B,
                      primal_from_dual, primal_objective,
                      unweighted_laplacian)

METHODS = ("gradient", "exact-newton", "sddm-newton", "neumann-newton")
ALPHA_RULES = ("fixed", "alpha_star", "backtracking")

DIVERGENCE_FACTOR = 10.0
DIVERGENCE_PATIENCE = 50


@dataclass(frozen=True)
class ConvergenceConstants:
    """Constants of the three-phase convergence analysis."""

    alpha_star: float
    xi: float
    zeta: float
    eta0: float
    eta1: float
    B: float
    gamma: float
    Gamma: float
    mu2: float
    mun: float
    eps: float

    @property
    def eps_window_body(self):
        """Precision window keeping xi < 1 (the enforced condition)."""
        return (self.mu2 / self.mun) * np.sqrt(self.gamma / self.Gamma)

    @property
    def eps_window_printed(self):
        """The window as printed in the source analysis (for reporting)."""
        return (self.mu2 / self.mun) * np.sqrt(self.Gamma / self.gamma)


def convergence_constants(problem, eps, summary=None):
    """Fill every phase constant from the problem data.

    With quadratic costs B = 0, so zeta vanishes and the phase thresholds
    are +inf: such runs have no finite phase boundaries and classify as
    terminal throughout.
    """
    L = unweighted_laplacian(problem)
    summary = summary or spectral_summary(L, "exact")
    mu2, mun = summary.mu_min_nonzero, summary.mu_max
    gamma, Gamma = problem.cost.gamma, problem.cost.Gamma
    B = lipschitz_constant_B(problem, summary)
    alpha_star = optimal_step_size(eps, gamma, Gamma, mu2, mun)
    xi = np.sqrt(1.0 - alpha_star
                 + alpha_star * eps * (mun / mu2) * np.sqrt(Gamma / gamma))
    zeta = B * (alpha_star * Gamma * (1.0 + eps)) ** 2 / (2.0 * mu2 ** 2)
    if zeta > 0:
        eta0 = xi * (1.0 - xi) / zeta
        eta1 = (1.0 - xi) / zeta
    else:
        eta0 = eta1 = np.inf
    return ConvergenceConstants(alpha_star, float(xi), float(zeta),
                                float(eta0), float(eta1), B, gamma, Gamma,
                                mu2, mun, eps)


def optimal_step_size(eps, gamma, Gamma, mu2, mun):
    """alpha* = e^{-eps^2}/(1+eps)^2 (gamma/Gamma * mu2/mun)^2."""
    window = (mu2 / mun) * np.sqrt(gamma / Gamma)
    if not (0 < eps < window):
        raise ParameterError(
            f"solver precision {eps} outside the step-size window "
            f"(0, {window:.6g})")
    return float(np.exp(-eps ** 2) / (1.0 + eps) ** 2
                 * (gamma / Gamma * mu2 / mun) ** 2)


def phase_classifier(gnorm_L, constants):
    """Label an iterate by its Laplacian gradient norm."""
    if gnorm_L >= constants.eta1:
        return "strict"
    if gnorm_L >= constants.eta0:
        return "quadratic"
    return "terminal"


def gradient_step(problem, lam, alpha):
    if alpha <= 0:
        raise ParameterError("step size must be positive")
    return lam - alpha * dual_gradient(problem, lam)


def exact_newton_direction(problem, lam, g=None):
    """d = -H(lam)^+ g via the dense pseudoinverse on the constant-orthogonal
    subspace. Reference oracle; capped at the dense size limit."""
    if problem.n > DENSE_ORACLE_CAP:
        raise ParameterError(
            f"exact Newton direction capped at n={DENSE_ORACLE_CAP}")
    g = dual_gradient(problem, lam) if g is None else g
    H = dual_hessian(problem, lam).to_dense()
    d = -scipy.linalg.pinvh(H) @ (g - g.mean())
    return d - d.mean()


def neumann_newton_direction(problem, lam, n_terms, g=None):
    """Truncated Neumann direction -D^{-1} sum_{k<=N} (A D^{-1})^k g using
    the splitting of the dual Hessian."""
    if n_terms < 0:
        raise ParameterError("number of series terms must be >= 0")
    g = dual_gradient(problem, lam) if g is None else g
    H = dual_hessian(problem, lam)
    v = g.copy()
    acc = v.copy()
    for _ in range(n_terms):
        v = H.offdiag_matvec(v / H.D)
        acc += v
    return -acc / H.D


class SddmNewtonEngine:
    """Newton directions through the grounded SDDM solve.

    Quadratic costs keep the Hessian constant, so the grounding, chain
    length, and power-row precomputation are reused across iterations (the
    trace header records that shortcut). The "dist" engine runs the per-node
    solver under the simulator; "chain" runs the centralized reference,
    which is arithmetically identical for R = 1 and skips the message
    bookkeeping.
    """

    def __init__(self, problem, eps, R, d_override=None, engine="dist"):
        if engine not in ("dist", "chain"):
            raise ParameterError(f"unknown solver engine {engine!r}")
        self.problem = problem
        self.eps = eps
        self.R = R
        self.d_override = d_override
        self.engine = engine
        self.reusable = problem.cost.kind == "quadratic"
        self.ground_node = default_ground_node(problem.graph)
        self._cache = None
        self.d = None

    def _grounded(self, lam):
        if self.reusable and self._cache is not None:
            return self._cache
        H = dual_hessian(self.problem, lam)
        Hg, gmap = ground(H, self.ground_node)
        if self.d_override is not None:
            d = self.d_override
        else:
            try:
                kappa = spectral_summary(Hg, "exact").kappa
            except ParameterError:
                kappa = spectral_summary(Hg, "bound").kappa
            d = chain_length(kappa)
        chain = build_exact_chain(Hg, d, measure_eps=False) \
            if self.engine == "chain" else None
        self._cache = (Hg, gmap, d, chain)
        self.d = d
        return self._cache

    def direction(self, lam, g):
        Hg, gmap, d, chain = self._grounded(lam)
        rhs = gmap.restrict(-(g - g.mean()))
        if self.engine == "chain":
            res = parallel_e_solve(chain, rhs, self.eps)
            messages = rounds = 0
            q = res.q
        else:
            inputs = node_inputs_from_system(Hg, rhs, d, self.R, self.eps)
            res = e_dist_r_solve(inputs)
            cost = message_stats(res.transcript)
            messages, rounds, q = cost.total_messages, cost.total_rounds, res.q
        full = gmap.embed(res.x, self.problem.n)
        return full - full.mean(), messages, rounds, q


def sddm_newton_direction(problem, lam, eps, R, d_override=None,
                          engine="dist"):
    """One-shot approximate Newton direction with its communication cost."""
    eng = SddmNewtonEngine(problem, eps, R, d_override, engine)
    g = dual_gradient(problem, lam)
    d, messages, rounds, _ = eng.direction(lam, g)
    return d, messages, rounds


@dataclass(frozen=True)
class TraceRow:
    k: int
    q: float
    f: float
    feas: float
    gnorm_L: float
    phase: str
    messages: int
    rounds: int
    ms: float


@dataclass
class RunTrace:
    header: dict
    rows: list
    constants: ConvergenceConstants

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def iterations_to(self, metric, threshold):
        """First iteration index whose metric is at or below threshold."""
        for r in self.rows:
            if getattr(r, metric) <= threshold:
                return r.k
        return None


@dataclass
class OptimizerConfig:
    method: str = "sddm-newton"
    eps: float = 1e-4
    R: int = 1
    alpha_rule: str = "backtracking"
    alpha: float = None
    gradient_threshold: float = 1e-10
    max_iter: int = None
    neumann_terms: int = 2
    d_override: int = None
    engine: str = "dist"
    armijo_factor: float = 0.5
    armijo_c: float = 1e-4


def _default_max_iter(method, n):
    return 10000 if method == "gradient" else 10 * n


def _fixed_gradient_alpha(constants):
    # stable for alpha < 2 gamma / mu_n(L); stay at half that bound
    return constants.gamma / constants.mun


def run_optimizer(problem, config, header_extra=None):
    """Descend the dual with the configured method and record the full trace.

    Stops at the gradient threshold or the iteration cap; raises if the
    gradient norm sits an order of magnitude above its initial value for 50
    consecutive iterations.
    """
    if config.method not in METHODS:
        raise ParameterError(f"unknown method {config.method!r}")
    if config.alpha_rule not in ALPHA_RULES:
        raise ParameterError(f"unknown step rule {config.alpha_rule!r}")
    constants = convergence_constants(problem, config.eps)
    L = unweighted_laplacian(problem)
    cap = config.max_iter or _default_max_iter(config.method, problem.n)
    engine = SddmNewtonEngine(problem, config.eps, config.R,
                              config.d_override, config.engine) \
        if config.method == "sddm-newton" else None

    lam = np.zeros(problem.n)
    rows = []
    bad_streak = 0
    g0_norm = None
    k = 0
    while True:
        t0 = time.perf_counter()
        g = dual_gradient(problem, lam)
        gnorm = float(np.linalg.norm(g))
        x = primal_from_dual(problem, lam)
        row = dict(k=k, q=dual_value(problem, lam),
                   f=primal_objective(problem, x),
                   feas=feasibility(problem, x),
                   gnorm_L=laplacian_seminorm(L, g),
                   messages=0, rounds=0)
        row["phase"] = phase_classifier(row["gnorm_L"], constants)

        g0_norm = gnorm if g0_norm is None else g0_norm
        if gnorm > DIVERGENCE_FACTOR * g0_norm:
            bad_streak += 1
            if bad_streak >= DIVERGENCE_PATIENCE:
                raise NumericalError(
                    f"{config.method} diverged: gradient norm {gnorm:.3e} "
                    f"stayed above 10x its initial value for "
                    f"{DIVERGENCE_PATIENCE} iterations")
        else:
            bad_streak = 0

        done = gnorm <= config.gradient_threshold or k >= cap
        if not done:
            if config.method == "gradient":
                direction = -g
            elif config.method == "exact-newton":
                direction = exact_newton_direction(problem, lam, g)
            elif config.method == "neumann-newton":
                direction = neumann_newton_direction(
                    problem, lam, config.neumann_terms, g)
            else:
                direction, msgs, rnds, _ = engine.direction(lam, g)
                row["messages"], row["rounds"] = msgs, rnds
            alpha = _choose_alpha(problem, config, constants, lam, g,
                                  direction)
            lam = lam + alpha * direction
        row["ms"] = (time.perf_counter() - t0) * 1e3
        rows.append(TraceRow(**row))
        if done:
            break
        k += 1

    header = {
        "method": config.method, "eps": config.eps, "R": config.R,
        "alpha_rule": config.alpha_rule, "n": problem.n,
        "m": problem.num_arcs, "gamma": constants.gamma,
        "Gamma": constants.Gamma, "threshold": config.gradient_threshold,
        "engine": config.engine if config.method == "sddm-newton" else "",
        "chain_reuse": bool(engine and engine.reusable),
        "chain_d": engine.d if engine else "",
    }
    if header_extra:
        header.update(header_extra)
    return RunTrace(header, rows, constants)


def _choose_alpha(problem, config, constants, lam, g, direction):
    if config.alpha_rule == "alpha_star":
        return constants.alpha_star
    if config.alpha_rule == "fixed":
        if config.alpha is not None:
            return config.alpha
        return _fixed_gradient_alpha(constants) \
            if config.method == "gradient" else 1.0
    # Armijo backtracking on the convex dual
    slope = float(g @ direction)
    q0 = dual_value(problem, lam)
    alpha = 1.0
    for _ in range(60):
        if dual_value(problem, lam + alpha * direction) \
                <= q0 + config.armijo_c * alpha * slope:
            return alpha
        alpha *= config.armijo_factor
    return alpha
