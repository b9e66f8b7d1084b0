"""Centralized inverse-chain solver for SDDM systems.

The chain built here is the exact-squaring chain: every level keeps the
original diagonal D0 while the off-diagonal operator squares, so level i
applies (A0 D0^{-1})^{2^i}. Levels are never materialized for solving; the
solver applies the level operator as repeated one-hop products, which keeps
the arithmetic identical to the per-node distributed execution. Dense level
matrices are only formed by the verification utilities, which double as test
oracles, under a size cap.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, NumericalError, ParameterError, StructureError
from .graphs import SplitMatrix, component_labels, is_sddm, spectral_summary
from .kernels import csr_matvec

VERIFY_CAP = 200

THIRD_LN2 = np.log(2.0) / 3.0

# 2 * ln(cbrt(2) / (cbrt(2) - 1)); the chain-length rule multiplies this by
# the condition number before taking the base-2 ceiling log.
CHAIN_LENGTH_FACTOR = 2.0 * np.log(2.0 ** (1.0 / 3.0) / (2.0 ** (1.0 / 3.0) - 1.0))


def chain_length(kappa):
    """Chain length d = ceil(log2(2 ln(cbrt2/(cbrt2-1)) * kappa)).

    Base-2 log matches the 2^d squaring structure and makes the final budget
    eps_d come out below (1/3) ln 2.
    """
    if kappa < 1:
        raise ParameterError("condition number must be >= 1")
    return max(1, int(np.ceil(np.log2(CHAIN_LENGTH_FACTOR * kappa))))


def richardson_cap(eps):
    """Sweep cap for the preconditioned Richardson loop."""
    return int(np.ceil(6.0 * np.log(1.0 / eps))) + 2


@dataclass(frozen=True)
class InverseChain:
    """Exact-squaring inverse chain of M0 = D - A.

    ad/da are the CSR triples of A0 D0^{-1} and D0^{-1} A0; epsilons holds the
    per-level budgets (zero below level d by construction). kappa_bound feeds
    the Richardson stopping guard.
    """

    M0: SplitMatrix
    d: int
    epsilons: np.ndarray
    eps_d_measured: bool
    kappa_bound: float
    ad: tuple = field(repr=False, default=None)  # (indptr, indices, data)
    da: tuple = field(repr=False, default=None)

    @property
    def n(self):
        return self.M0.n

    def apply_ad_power(self, v, times):
        ptr, ind, dat = self.ad
        for _ in range(times):
            v = csr_matvec(ptr, ind, dat, v)
        return v

    def apply_da_power(self, v, times):
        ptr, ind, dat = self.da
        for _ in range(times):
            v = csr_matvec(ptr, ind, dat, v)
        return v

    def level_dense(self, i):
        """Dense (D_i, A_i) for verification; capped at n=VERIFY_CAP."""
        if self.n > VERIFY_CAP:
            raise ParameterError(f"dense chain levels capped at n={VERIFY_CAP}")
        A0 = np.zeros((self.n, self.n))
        for k in range(self.n):
            ind, dat = self.M0.row(k)
            A0[k, ind] = dat
        P = A0 / self.M0.D[None, :]
        Pi = np.linalg.matrix_power(P, 2 ** i)
        return np.diag(self.M0.D.copy()), Pi * self.M0.D[None, :]


def _require_nonsingular_sddm(M0):
    rep = is_sddm(M0)
    if not rep.ok:
        raise StructureError(f"input is not SDDM: {rep.reason}")
    slack = M0.D - M0.offdiag_row_sums()
    strict = slack > 1e-12 * np.maximum(M0.D, 1.0)
    # every support component must contain a strictly dominant row, else the
    # corresponding Laplacian block is singular
    comp = component_labels(M0.support_graph())
    for c in range(comp.max() + 1):
        if not np.any(strict[comp == c]):
            raise StructureError(
                "matrix has a singular Laplacian block; ground it first")


def build_exact_chain(M0, d, measure_eps=True):
    """Exact-squaring chain of length d for a nonsingular SDDM matrix.

    Level recurrences hold with equality, so eps_0..eps_{d-1} are zero and
    only the final budget eps_d is nonzero. It is measured densely when the
    instance is under the verification cap, otherwise taken on faith from the
    chain-length rule (and recorded as such).
    """
    if d < 1:
        raise ParameterError("chain length must be >= 1")
    _require_nonsingular_sddm(M0)
    ad_data = M0.data / M0.D[M0.indices]
    rows = np.repeat(np.arange(M0.n), np.diff(M0.indptr))
    da_data = M0.data / M0.D[rows]
    eps = np.zeros(d + 1)
    measured = False
    if measure_eps and M0.n <= VERIFY_CAP:
        chain_tmp = InverseChain(M0, d, eps, False,
                                 1.0, (M0.indptr, M0.indices, ad_data),
                                 (M0.indptr, M0.indices, da_data))
        Dd, Ad = chain_tmp.level_dense(d)
        eps[d] = loewner_approx_factor(Dd - Ad, Dd)
        measured = True
    else:
        eps[d] = THIRD_LN2
    kb = spectral_summary(M0, mode="bound").kappa
    return InverseChain(M0, d, eps, measured, kb,
                        (M0.indptr, M0.indices, ad_data),
                        (M0.indptr, M0.indices, da_data))


def parallel_r_solve(chain, b0):
    """Crude chain solve: forward lifts of the right-hand side, diagonal
    solve at the deepest level, then halving corrections on the way back."""
    b0 = np.asarray(b0, dtype=np.float64)
    if b0.shape != (chain.n,):
        raise ParameterError("right-hand side has wrong dimension")
    D = chain.M0.D
    d = chain.d
    bs = [b0]
    for i in range(1, d + 1):
        u = chain.apply_ad_power(bs[-1], 2 ** (i - 1))
        bs.append(bs[-1] + u)
    x = bs[d] / D
    for i in range(d - 1, 0, -1):
        eta = chain.apply_da_power(x, 2 ** i)
        x = 0.5 * (bs[i] / D + x + eta)
    eta = chain.apply_da_power(x, 1)
    return 0.5 * (bs[0] / D + x + eta)


@dataclass(frozen=True)
class ESolveResult:
    x: np.ndarray
    q: int
    rel_residual: float


def parallel_e_solve(chain, b0, eps):
    """Preconditioned Richardson refinement of the crude solve.

    Stops when the 2-norm relative residual drops below eps/sqrt(kappa_bound)
    (which implies the M0-norm contract) or errors out at the sweep cap.
    """
    if not (0 < eps <= 0.5):
        raise ParameterError("eps must lie in (0, 1/2]")
    if chain.eps_d_measured and chain.epsilons.sum() >= THIRD_LN2:
        raise NumericalError(
            "chain budget sum exceeds (1/3) ln 2; lengthen the chain")
    b0 = np.asarray(b0, dtype=np.float64)
    bnorm = float(np.linalg.norm(b0))
    if bnorm == 0.0:
        return ESolveResult(np.zeros(chain.n), 0, 0.0)
    threshold = eps / np.sqrt(chain.kappa_bound)
    qmax = richardson_cap(eps)
    chi = parallel_r_solve(chain, b0)
    y = np.zeros(chain.n)
    t = 0
    while True:
        u1 = chain.M0.matvec(y)
        rel = float(np.linalg.norm(u1 - b0)) / bnorm
        if t >= 1 and rel <= threshold:
            return ESolveResult(y, t, rel)
        if t >= qmax:
            raise ConvergenceError(
                f"Richardson cap {qmax} reached with relative residual "
                f"{rel:.3e} (threshold {threshold:.3e}); the chain is "
                "likely too short", residual=rel)
        u2 = parallel_r_solve(chain, u1)
        y = y - u2 + chi
        t += 1


def loewner_approx_factor(X, Y, tol=1e-9):
    """Smallest alpha with e^{-alpha} X <= Y <= e^{alpha} X (PSD order).

    Computed from the generalized eigenvalues of (Y, X) restricted to the
    common range; the null spaces of X and Y must agree.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape or X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ParameterError("matching square matrices required")
    if X.shape[0] > VERIFY_CAP:
        raise ParameterError(f"Loewner oracle capped at n={VERIFY_CAP}")
    wx, vx = scipy.linalg.eigh(X)
    scale = max(abs(wx[0]), abs(wx[-1]), 1e-300)
    cut = X.shape[0] * np.finfo(float).eps * scale
    keep = wx > cut
    if not np.any(keep):
        raise ParameterError("X is (numerically) zero")
    # verify Y shares the null space of X
    null = vx[:, ~keep]
    if null.size and np.linalg.norm(Y @ null) > tol * max(
            1.0, np.linalg.norm(Y)):
        raise StructureError("X and Y have mismatched null spaces")
    B = vx[:, keep]
    Xr = B.T @ X @ B
    Yr = B.T @ Y @ B
    lam = scipy.linalg.eigh(Yr, Xr, eigvals_only=True)
    if np.any(lam <= 0):
        raise StructureError("Y is not positive definite on the range of X")
    return float(np.max(np.abs(np.log(lam))))


@dataclass(frozen=True)
class ChainVerification:
    measured: np.ndarray       # per-level worst factor; index d is condition 3
    declared: np.ndarray
    flagged: tuple             # levels whose measurement exceeds the budget

    @property
    def ok(self):
        return not self.flagged


def verify_chain(chain, tol=1e-10):
    """Measure every chain condition with the Loewner oracle.

    measured[i-1] covers the level-i recurrence and diagonal conditions;
    measured[d] is the terminal D_d vs D_d - A_d factor. Levels exceeding
    their declared budget (plus tol) are flagged.
    """
    if chain.n > VERIFY_CAP:
        raise ParameterError(f"chain verification capped at n={VERIFY_CAP}")
    measured = np.zeros(chain.d + 1)
    prev = chain.level_dense(0)
    for i in range(1, chain.d + 1):
        Dp, Ap = prev
        cur = chain.level_dense(i)
        Dc, Ac = cur
        target = Dp - Ap @ np.linalg.solve(Dp, Ap)
        a1 = loewner_approx_factor(Dc - Ac, target)
        a2 = loewner_approx_factor(Dc, Dp)
        measured[i - 1] = max(a1, a2)
        prev = cur
    Dd, Ad = prev
    measured[chain.d] = loewner_approx_factor(Dd, Dd - Ad)
    flagged = tuple(np.nonzero(measured > chain.epsilons + tol)[0])
    return ChainVerification(measured, chain.epsilons.copy(), flagged)
