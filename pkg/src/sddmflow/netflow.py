"""Min-cost network flow: edge cost families and the dual machinery.

Two strictly convex, twice-differentiable cost families are supported.
Quadratic costs (a/2) x^2 + c x have constant curvature, so the dual Hessian
does not depend on the dual point and the curvature-inverse Lipschitz
constant is zero. The smoothed family (a/2) x^2 + s sqrt(1 + x^2) has
curvature in (a, a + s], giving a genuinely point-dependent Hessian for
exercising the second-order analysis.

The dual function used throughout is the convex one,

    q(lambda) = sum_e [ -Phi_e(x_e) + (A^T lambda)_e x_e ] - lambda^T b,

whose gradient is A x(lambda) - b and whose minimum is -f(x*). Descent
steps decrease q; the recovered flow approaches feasibility.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import NumericalError, ParameterError, StructureError
from .graphs import (DirectedNetwork, SplitMatrix, WeightedGraph,
                     is_connected, laplacian, spectral_summary)

ROOT_TOL = 1e-12


@dataclass(frozen=True)
class CostFunction:
    """Per-edge separable cost family."""

    kind: str                 # "quadratic" | "smoothed"
    a: np.ndarray
    c: np.ndarray = None      # quadratic linear term
    s: np.ndarray = None      # smoothing weight

    @staticmethod
    def quadratic(a, c=None):
        a = np.asarray(a, dtype=np.float64)
        c = np.zeros_like(a) if c is None else np.asarray(c, dtype=np.float64)
        if np.any(a <= 0):
            raise ParameterError("quadratic coefficients must be positive")
        return CostFunction("quadratic", a, c=c)

    @staticmethod
    def smoothed(a, s):
        a = np.asarray(a, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        if np.any(a <= 0) or np.any(s <= 0):
            raise ParameterError("smoothed coefficients must be positive")
        return CostFunction("smoothed", a, s=s)

    @property
    def num_edges(self):
        return self.a.shape[0]

    def value(self, x):
        if self.kind == "quadratic":
            return 0.5 * self.a * x * x + self.c * x
        return 0.5 * self.a * x * x + self.s * np.sqrt(1.0 + x * x)

    def deriv(self, x):
        if self.kind == "quadratic":
            return self.a * x + self.c
        return self.a * x + self.s * x / np.sqrt(1.0 + x * x)

    def curvature(self, x):
        if self.kind == "quadratic":
            return self.a * np.ones_like(x)
        return self.a + self.s / (1.0 + x * x) ** 1.5

    def inv_deriv(self, y):
        """Solve deriv(x) = y edgewise (the primal recovery map)."""
        if self.kind == "quadratic":
            return (y - self.c) / self.a
        out = np.empty_like(y)
        for e in range(y.shape[0]):
            a, s, ye = self.a[e], self.s[e], y[e]
            lo = (ye - s) / a - 1.0
            hi = (ye + s) / a + 1.0
            try:
                out[e] = scipy.optimize.brentq(
                    lambda x: a * x + s * x / np.sqrt(1.0 + x * x) - ye,
                    lo, hi, xtol=ROOT_TOL, rtol=8.9e-16)
            except ValueError as exc:
                raise NumericalError(
                    f"primal recovery failed on edge {e}: {exc}") from exc
        return out

    @property
    def gamma(self):
        """Lower curvature bound."""
        return float(self.a.min())

    @property
    def Gamma(self):
        """Upper curvature bound."""
        if self.kind == "quadratic":
            return float(self.a.max())
        return float((self.a + self.s).max())

    def curvature_inverse_lipschitz(self, grid=4096, span=32.0):
        """Lipschitz constant of x -> 1/curvature(x), maximized on a grid.

        Zero for quadratic costs. For the smoothed family the derivative of
        the curvature inverse decays at both tails, so a wide symmetric grid
        brackets the maximum.
        """
        if self.kind == "quadratic":
            return 0.0
        xs = np.linspace(-span, span, grid)
        best = 0.0
        for e in range(self.num_edges):
            a, s = self.a[e], self.s[e]
            phi3 = -3.0 * s * xs / (1.0 + xs * xs) ** 2.5
            phi2 = a + s / (1.0 + xs * xs) ** 1.5
            best = max(best, float(np.max(np.abs(phi3) / phi2 ** 2)))
        return best


@dataclass(frozen=True)
class FlowProblem:
    network: DirectedNetwork
    cost: CostFunction
    b: np.ndarray
    graph: WeightedGraph = field(repr=False, default=None)

    @staticmethod
    def create(network, cost, b):
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (network.n,):
            raise StructureError("supply vector has wrong dimension")
        if abs(b.sum()) > 1e-9 * max(1.0, np.abs(b).max()):
            raise StructureError("supplies must sum to zero")
        if cost.num_edges != network.num_arcs:
            raise StructureError("one cost function per arc required")
        graph = network.undirected_graph()
        if not is_connected(graph):
            raise StructureError("network must be connected")
        return FlowProblem(network, cost, b, graph)

    @property
    def n(self):
        return self.network.n

    @property
    def num_arcs(self):
        return self.network.num_arcs


def primal_from_dual(problem, lam):
    """x(lambda): edgewise inverse of the cost derivative at the potential
    difference across each arc. Invariant under lambda shifts by constants."""
    y = problem.network.apply_incidence_t(np.asarray(lam, dtype=np.float64))
    return problem.cost.inv_deriv(y)


def dual_gradient(problem, lam):
    """g = A x(lambda) - b; each component needs only incident arcs."""
    return problem.network.apply_incidence(primal_from_dual(problem, lam)) \
        - problem.b


def dual_value(problem, lam):
    """Convex dual q(lambda); decreases along descent runs to -f(x*)."""
    lam = np.asarray(lam, dtype=np.float64)
    x = primal_from_dual(problem, lam)
    y = problem.network.apply_incidence_t(lam)
    return float(np.sum(-problem.cost.value(x) + y * x) - lam @ problem.b)


def primal_objective(problem, x):
    return float(np.sum(problem.cost.value(x)))


def feasibility(problem, x):
    """Euclidean norm of the conservation residual A x - b."""
    return float(np.linalg.norm(problem.network.apply_incidence(x)
                                - problem.b))


def dual_hessian(problem, lam):
    """Weighted Laplacian with edge weights 1/curvature(x(lambda))."""
    x = primal_from_dual(problem, lam)
    w = 1.0 / problem.cost.curvature(x)
    arcs = problem.network.arcs
    n = problem.n
    deg = np.zeros(n)
    np.add.at(deg, arcs[:, 0], w)
    np.add.at(deg, arcs[:, 1], w)
    # accumulate parallel arcs onto the shared undirected support
    lo = np.minimum(arcs[:, 0], arcs[:, 1])
    hi = np.maximum(arcs[:, 0], arcs[:, 1])
    key = lo * n + hi
    uniq, inv = np.unique(key, return_inverse=True)
    acc = np.zeros(uniq.shape[0])
    np.add.at(acc, inv, w)
    edges = np.column_stack([uniq // n, uniq % n])
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    val = np.concatenate([acc, acc])
    order = np.lexsort((dst, src))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(ptr, src[order] + 1, 1)
    np.cumsum(ptr, out=ptr)
    return SplitMatrix.from_parts(deg, ptr, dst[order], val[order])


def unweighted_laplacian(problem):
    """The plain Laplacian of the network support (the norm that the
    convergence analysis is phrased in)."""
    return laplacian(problem.graph)


def laplacian_seminorm(L, v):
    """sqrt(v^T L v) with the constant direction projected out first, so
    roundoff in the null direction cannot contribute."""
    v = np.asarray(v, dtype=np.float64)
    v = v - v.mean()
    return float(np.sqrt(max(0.0, v @ L.matvec(v))))


def lipschitz_constant_B(problem, summary=None):
    """Hessian Lipschitz constant mu_n(L) * delta / (gamma sqrt(mu_2(L)))."""
    if summary is None:
        summary = spectral_summary(unweighted_laplacian(problem), "exact")
    delta = problem.cost.curvature_inverse_lipschitz()
    return hessian_lipschitz_from_delta(summary, problem.cost.gamma, delta)


def hessian_lipschitz_from_delta(summary, gamma, delta):
    return summary.mu_max * delta / (gamma * np.sqrt(summary.mu_min_nonzero))


def solve_primal_kkt(problem):
    """Dense KKT oracle for quadratic problems: minimize f subject to the
    conservation constraints. Test/reference use only."""
    if problem.cost.kind != "quadratic":
        raise ParameterError("KKT oracle covers quadratic costs only")
    E, n = problem.num_arcs, problem.n
    A = problem.network.incidence_dense()
    K = np.zeros((E + n, E + n))
    K[:E, :E] = np.diag(problem.cost.a)
    K[:E, E:] = A.T
    K[E:, :E] = A
    rhs = np.concatenate([-problem.cost.c, problem.b])
    sol, *_ = scipy.linalg.lstsq(K, rhs)
    return sol[:E]
