"""Per-node R-hop solvers for SDDM systems.

Every node owns one row of the standard splitting, its right-hand-side
entry, the chain length d, and the hop radius R (a power of two). The crude
solver runs the inverse chain forward and backward, applying the level
operator either one hop at a time or through precomputed R-hop power rows;
the exact solver wraps it in preconditioned Richardson sweeps. All
communication goes through the round-based simulator, so transcripts carry
exact message and round counts.

With R = 1 the power rows coincide with the one-hop operator rows, making
the per-node execution bit-identical to the centralized chain solver; for
larger R the two paths differ only by floating-point association.
"""

from dataclasses import dataclass

import numpy as np

from . import harness
from .chain import chain_length, richardson_cap
from .errors import ConfigurationError, ConvergenceError, ParameterError
from .graphs import SplitMatrix, spectral_summary
from .kernels import csr_matvec, csr_spgemm


@dataclass(frozen=True)
class NodeInput:
    """Everything node k knows at startup."""

    k: int
    d_kk: float
    nbr_ids: np.ndarray
    nbr_wts: np.ndarray       # off-diagonal row of the splitting (A row)
    b_k: float
    d: int
    R: int
    eps: float = None         # exact solver only


@dataclass(frozen=True)
class PowerRow:
    owner: int
    power: int
    indices: np.ndarray
    values: np.ndarray


def node_inputs_from_system(M, b, d, R, eps=None):
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (M.n,):
        raise ParameterError("right-hand side has wrong dimension")
    out = []
    for k in range(M.n):
        ind, dat = M.row(k)
        out.append(NodeInput(k, float(M.D[k]), ind.copy(), dat.copy(),
                             float(b[k]), d, R, eps))
    return out


def _require_power_of_two(R):
    if R < 1 or (R & (R - 1)) != 0:
        raise ParameterError(f"hop radius must be a power of two, got {R}")


def assemble_system(inputs):
    """Rebuild the global splitting from per-node rows, validating that the
    shared configuration (d, R, eps) agrees across nodes."""
    n = len(inputs)
    if sorted(inp.k for inp in inputs) != list(range(n)):
        raise ConfigurationError("node ids must cover 0..n-1")
    inputs = sorted(inputs, key=lambda inp: inp.k)
    d_set = {inp.d for inp in inputs}
    r_set = {inp.R for inp in inputs}
    e_set = {inp.eps for inp in inputs}
    if len(d_set) != 1 or len(r_set) != 1 or len(e_set) != 1:
        raise ConfigurationError(
            "nodes disagree on chain length, hop radius, or precision")
    d, R = d_set.pop(), r_set.pop()
    _require_power_of_two(R)
    if d < 1:
        raise ConfigurationError("chain length must be >= 1")
    ptr = np.zeros(n + 1, dtype=np.int64)
    for inp in inputs:
        ptr[inp.k + 1] = inp.nbr_ids.shape[0]
    np.cumsum(ptr, out=ptr)
    ind = np.concatenate([inp.nbr_ids for inp in inputs]) \
        if ptr[-1] else np.zeros(0, dtype=np.int64)
    dat = np.concatenate([inp.nbr_wts for inp in inputs]) \
        if ptr[-1] else np.zeros(0)
    D = np.array([inp.d_kk for inp in inputs])
    b = np.array([inp.b_k for inp in inputs])
    M = SplitMatrix.from_parts(D, ptr, ind, dat)
    return M, b, d, R, e_set.pop()


@dataclass
class PartOneState:
    """Sweep-invariant precomputation shared by every chain pass."""

    D: np.ndarray
    ad: tuple                 # CSR of A0 D0^{-1}
    da: tuple                 # CSR of D0^{-1} A0
    c0: tuple                 # CSR of (A0 D0^{-1})^R
    c1: tuple                 # CSR of (D0^{-1} A0)^R
    R: int
    rho: int


def _csr_power(base, R, n):
    ptr, ind, dat = base
    out = (ptr, ind, dat)
    for _ in range(R - 1):
        out = csr_spgemm(out[0], out[1], out[2], ptr, ind, dat, n)
    return out


def _part_one(sim, M, R):
    """Algorithm part one: local splitting rows plus the Comp0/Comp1 power
    rows. The diagonal exchange lets each node normalize its row by neighbor
    diagonals; row floods propagate the knowledge the recursions need."""
    n = M.n
    rho = int(np.log2(R))
    sim.exchange(harness.TAG_COMP0, 0, M.D)
    ad_dat = M.data / M.D[M.indices]
    rows = np.repeat(np.arange(n), np.diff(M.indptr))
    da_dat = M.data / M.D[rows]
    ad = (M.indptr, M.indices, ad_dat)
    da = (M.indptr, M.indices, da_dat)
    # Comp0: R-1 relay rounds, one squaring-free right-multiply per round
    sim.row_flood(harness.TAG_COMP0, R - 1)
    c0 = _csr_power(ad, R, n)
    sim.row_flood(harness.TAG_COMP1, R - 1)
    c1 = _csr_power(da, R, n)
    sim.note_power_support("C0", c0[0], c0[1])
    sim.note_power_support("C1", c1[0], c1[1])
    return PartOneState(M.D, ad, da, c0, c1, R, rho)


def _chain_pass(sim, st, b0, d):
    """Algorithm parts two and three for one right-hand side."""
    D = st.D
    bs = [b0]
    for i in range(1, d + 1):
        u = bs[-1]
        if i - 1 < st.rho:
            for _ in range(2 ** (i - 1)):
                u = sim.exchange(harness.TAG_FWD_U, i, u)
                u = csr_matvec(*st.ad, u)
        else:
            for _ in range(2 ** (i - 1) // st.R):
                u = sim.flood(harness.TAG_FWD_U, i, u, st.R)
                u = csr_matvec(*st.c0, u)
        bs.append(bs[-1] + u)
    x = bs[d] / D
    for i in range(d - 1, 0, -1):
        eta = x
        if i < st.rho:
            for _ in range(2 ** i):
                eta = sim.exchange(harness.TAG_BWD_ETA, i, eta)
                eta = csr_matvec(*st.da, eta)
        else:
            for _ in range(2 ** i // st.R):
                eta = sim.flood(harness.TAG_BWD_ETA, i, eta, st.R)
                eta = csr_matvec(*st.c1, eta)
        x = 0.5 * (bs[i] / D + x + eta)
    eta = sim.exchange(harness.TAG_BWD_ETA, 0, x)
    eta = csr_matvec(*st.da, eta)
    return 0.5 * (bs[0] / D + x + eta)


def _power_rows(csr, R, n):
    ptr, ind, dat = csr
    return [PowerRow(k, R, ind[ptr[k]:ptr[k + 1]].copy(),
                     dat[ptr[k]:ptr[k + 1]].copy()) for k in range(n)]


@dataclass(frozen=True)
class CompResult:
    rows: list
    transcript: harness.Transcript


def comp0(inputs, log_messages=False):
    """Per-node rows of (A0 D0^{-1})^R after R-1 relay rounds."""
    M, _, _, R, _ = assemble_system(inputs)
    graph = M.support_graph()

    def program(sim):
        st = _part_one(sim, M, R)
        program.rows = _power_rows(st.c0, R, M.n)

    t = harness.run(graph, program, log_messages=log_messages)
    return CompResult(program.rows, t)


def comp1(inputs, log_messages=False):
    """Per-node rows of (D0^{-1} A0)^R; mirrors comp0."""
    M, _, _, R, _ = assemble_system(inputs)
    graph = M.support_graph()

    def program(sim):
        st = _part_one(sim, M, R)
        program.rows = _power_rows(st.c1, R, M.n)

    t = harness.run(graph, program, log_messages=log_messages)
    return CompResult(program.rows, t)


@dataclass(frozen=True)
class DistSolveResult:
    x: np.ndarray
    transcript: harness.Transcript
    q: int = 0
    rel_residual: float = 0.0

    @property
    def cost(self):
        return harness.message_stats(self.transcript)


def r_dist_r_solve(inputs, log_messages=False):
    """Crude R-hop solve; the gathered vector matches the centralized chain
    solver (bit-identically for R = 1)."""
    M, b0, d, R, _ = assemble_system(inputs)
    graph = M.support_graph()

    def program(sim):
        st = _part_one(sim, M, R)
        x0 = _chain_pass(sim, st, b0, d)
        sim.gather("x0", x0)

    t = harness.run(graph, program, log_messages=log_messages)
    return DistSolveResult(t.gathered["x0"], t)


def e_dist_r_solve(inputs, eps=None, log_messages=False):
    """Exact R-hop solve via preconditioned Richardson sweeps.

    Stopping mirrors the centralized policy: the 2-norm relative residual
    must fall below eps / sqrt(kappa_bound), which implies the M0-norm
    contract; the sweep cap signals a broken chain with per-node residual
    contributions attached.
    """
    M, b0, d, R, eps_in = assemble_system(inputs)
    eps = eps_in if eps is None else eps
    if eps is None or not (0 < eps <= 0.5):
        raise ParameterError("eps must lie in (0, 1/2]")
    graph = M.support_graph()
    kappa_bound = spectral_summary(M, mode="bound").kappa
    threshold = eps / np.sqrt(kappa_bound)
    qmax = richardson_cap(eps)
    bnorm = float(np.linalg.norm(b0))

    def program(sim):
        st = _part_one(sim, M, R)
        if bnorm == 0.0:
            program.q = 0
            sim.gather("x", np.zeros(M.n))
            return
        chi = _chain_pass(sim, st, b0, d)
        y = np.zeros(M.n)
        t = 0
        while True:
            yn = sim.exchange(harness.TAG_RICH_U1, 0, y)
            u1 = st.D * y - csr_matvec(M.indptr, M.indices, M.data, yn)
            rel = float(np.linalg.norm(u1 - b0)) / bnorm
            if t >= 1 and rel <= threshold:
                break
            if t >= qmax:
                raise ConvergenceError(
                    f"Richardson cap {qmax} reached with relative residual "
                    f"{rel:.3e} (threshold {threshold:.3e})",
                    residual=rel, per_node=np.abs(u1 - b0))
            u2 = _chain_pass(sim, st, u1, d)
            y = y - u2 + chi
            t += 1
        program.q = t
        program.rel = rel
        sim.gather("x", y)

    t = harness.run(graph, program, log_messages=log_messages)
    return DistSolveResult(t.gathered["x"], t, program.q,
                           getattr(program, "rel", 0.0))


def solve_grounded_system(M, b, eps, R, d=None, log_messages=False):
    """Convenience wrapper: chain length from the exact condition number
    (falling back to the spectral bound above the dense cap), then the exact
    distributed solve."""
    if d is None:
        try:
            kappa = spectral_summary(M, mode="exact").kappa
        except ParameterError:
            kappa = spectral_summary(M, mode="bound").kappa
        d = chain_length(kappa)
    inputs = node_inputs_from_system(M, b, d, R, eps)
    return e_dist_r_solve(inputs, log_messages=log_messages)
