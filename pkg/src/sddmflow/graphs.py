"""Graph, splitting, and spectral primitives.

Weighted undirected graphs double as both the matrix sparsity structure and
the communication topology of the round-based simulator. Matrices that drive
the solvers are kept in standard-splitting form (positive diagonal D minus a
non-negative symmetric off-diagonal part A) with CSR storage for A, because
every per-node algorithm consumes exactly one row of that splitting.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ParameterError, StructureError

DENSE_ORACLE_CAP = 2000


def _build_adjacency(n, edges, weights):
    """CSR adjacency (both directions per undirected edge), columns sorted."""
    m = edges.shape[0]
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    wts = np.concatenate([weights, weights])
    eid = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((dst, src))
    src, dst, wts, eid = src[order], dst[order], wts[order], eid[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst.astype(np.int64), wts.astype(np.float64), eid


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected weighted graph with a CSR neighbor index."""

    n: int
    edges: np.ndarray       # (m, 2) int64, i < j per row
    weights: np.ndarray     # (m,) float64, strictly positive
    adj_ptr: np.ndarray = field(repr=False, default=None)
    adj_ind: np.ndarray = field(repr=False, default=None)
    adj_wts: np.ndarray = field(repr=False, default=None)
    adj_eid: np.ndarray = field(repr=False, default=None)

    @staticmethod
    def from_edges(n, edges, weights):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if edges.shape[0] != weights.shape[0]:
            raise StructureError("edge and weight counts differ")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise StructureError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise StructureError("self-loops are not allowed")
        if np.any(weights <= 0):
            raise StructureError("edge weights must be strictly positive")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        edges = np.column_stack([lo, hi])
        key = lo * n + hi
        if np.unique(key).size != key.size:
            raise StructureError("duplicate edges are not allowed")
        ptr, ind, wts, eid = _build_adjacency(n, edges, weights)
        return WeightedGraph(n, edges, weights, ptr, ind, wts, eid)

    @property
    def m(self):
        return self.edges.shape[0]

    def neighbors(self, k):
        return self.adj_ind[self.adj_ptr[k]:self.adj_ptr[k + 1]]

    def degrees(self):
        return np.diff(self.adj_ptr)

    @property
    def d_max(self):
        return int(self.degrees().max()) if self.n else 0


@dataclass(frozen=True)
class DirectedNetwork:
    """Directed arcs over a node set; columns of the incidence matrix carry
    exactly one +1 (source) and one -1 (destination)."""

    n: int
    arcs: np.ndarray  # (E, 2) int64 rows (src, dst)

    @staticmethod
    def from_arcs(n, arcs):
        arcs = np.asarray(arcs, dtype=np.int64).reshape(-1, 2)
        if arcs.size and (arcs.min() < 0 or arcs.max() >= n):
            raise StructureError("arc endpoint out of range")
        if np.any(arcs[:, 0] == arcs[:, 1]):
            raise StructureError("self-loop arcs are not allowed")
        return DirectedNetwork(n, arcs)

    @property
    def num_arcs(self):
        return self.arcs.shape[0]

    def incidence_dense(self):
        A = np.zeros((self.n, self.num_arcs))
        A[self.arcs[:, 0], np.arange(self.num_arcs)] = 1.0
        A[self.arcs[:, 1], np.arange(self.num_arcs)] = -1.0
        return A

    def apply_incidence(self, x):
        """A @ x without materializing the incidence matrix."""
        out = np.zeros(self.n)
        np.add.at(out, self.arcs[:, 0], x)
        np.subtract.at(out, self.arcs[:, 1], x)
        return out

    def apply_incidence_t(self, lam):
        """A.T @ lam; component e is lam[src_e] - lam[dst_e]."""
        return lam[self.arcs[:, 0]] - lam[self.arcs[:, 1]]

    def undirected_graph(self, weights=None):
        w = np.ones(self.num_arcs) if weights is None else weights
        return WeightedGraph.from_edges(self.n, self.arcs, w)


@dataclass(frozen=True)
class SplitMatrix:
    """SDDM matrix M = D - A stored as its standard splitting."""

    n: int
    D: np.ndarray                        # (n,) positive diagonal
    indptr: np.ndarray = field(repr=False, default=None)
    indices: np.ndarray = field(repr=False, default=None)
    data: np.ndarray = field(repr=False, default=None)

    @staticmethod
    def from_parts(D, indptr, indices, data, validate=True):
        D = np.asarray(D, dtype=np.float64)
        n = D.shape[0]
        M = SplitMatrix(n, D, np.asarray(indptr, dtype=np.int64),
                        np.asarray(indices, dtype=np.int64),
                        np.asarray(data, dtype=np.float64))
        if validate:
            M.validate()
        return M

    @staticmethod
    def from_dense(M, validate=True):
        M = np.asarray(M, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise StructureError("square matrix required")
        D = np.diag(M).copy()
        A = -M.copy()
        np.fill_diagonal(A, 0.0)
        rows, cols = np.nonzero(A)
        indptr = np.zeros(M.shape[0] + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        np.cumsum(indptr, out=indptr)
        return SplitMatrix.from_parts(D, indptr, cols, A[rows, cols], validate)

    def validate(self):
        rep = is_sddm(self)
        if not rep.ok:
            raise StructureError(f"not an SDDM splitting: {rep.reason}")

    @property
    def nnz(self):
        return self.data.shape[0]

    def row(self, k):
        sl = slice(self.indptr[k], self.indptr[k + 1])
        return self.indices[sl], self.data[sl]

    def offdiag_row_sums(self):
        out = np.zeros(self.n)
        if self.nnz:
            counts = np.diff(self.indptr)
            np.add.at(out, np.repeat(np.arange(self.n), counts), self.data)
        return out

    def offdiag_matvec(self, x):
        from .kernels import csr_matvec
        return csr_matvec(self.indptr, self.indices, self.data, x)

    def matvec(self, x):
        return self.D * x - self.offdiag_matvec(x)

    def to_dense(self):
        if self.n > DENSE_ORACLE_CAP:
            raise ParameterError(f"dense form capped at n={DENSE_ORACLE_CAP}")
        M = np.zeros((self.n, self.n))
        for k in range(self.n):
            ind, dat = self.row(k)
            M[k, ind] = -dat
        np.fill_diagonal(M, self.D)
        return M

    def support_graph(self):
        """Undirected graph of the off-diagonal support (edge weights A_ij)."""
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        mask = rows < self.indices
        edges = np.column_stack([rows[mask], self.indices[mask]])
        return WeightedGraph.from_edges(self.n, edges, self.data[mask])


@dataclass(frozen=True)
class SpectralSummary:
    mu_min_nonzero: float
    mu_max: float
    kappa: float
    mode: str = "exact"


@dataclass(frozen=True)
class SddmReport:
    ok: bool
    reason: str = ""
    bad_rows: tuple = ()


_SDDM_RTOL = 1e-12


def is_sddm(M):
    """Check symmetry, non-positive off-diagonals, and row dominance.

    Accepts a dense square array or a SplitMatrix. Returns an SddmReport whose
    bad_rows lists every row violating the dominance inequality.
    """
    if isinstance(M, SplitMatrix):
        if np.any(M.D <= 0):
            return SddmReport(False, "non-positive diagonal entry",
                              tuple(np.nonzero(M.D <= 0)[0]))
        if M.nnz and np.any(M.data < 0):
            return SddmReport(False, "negative entry in off-diagonal part A")
        if M.nnz and np.any(M.indices == np.repeat(
                np.arange(M.n), np.diff(M.indptr))):
            return SddmReport(False, "nonzero diagonal entry stored in A")
        dense_like = None
        D, rowsum = M.D, M.offdiag_row_sums()
        # symmetry of A: compare against its transpose pattern
        rows = np.repeat(np.arange(M.n), np.diff(M.indptr))
        fwd = np.lexsort((M.indices, rows))
        bwd = np.lexsort((rows, M.indices))
        sym = (np.array_equal(rows[fwd], M.indices[bwd])
               and np.array_equal(M.indices[fwd], rows[bwd])
               and np.allclose(M.data[fwd], M.data[bwd], rtol=1e-13, atol=0))
        if not sym:
            return SddmReport(False, "off-diagonal part is not symmetric")
    else:
        dense_like = np.asarray(M, dtype=np.float64)
        if dense_like.ndim != 2 or dense_like.shape[0] != dense_like.shape[1]:
            raise StructureError("square matrix required")
        if not np.allclose(dense_like, dense_like.T, rtol=1e-13, atol=0):
            raise StructureError("symmetric matrix required")
        off = dense_like - np.diag(np.diag(dense_like))
        if np.any(off > 1e-13 * max(1.0, np.abs(dense_like).max())):
            return SddmReport(False, "positive off-diagonal entry")
        D = np.diag(dense_like)
        rowsum = -off.sum(axis=1)
        if np.any(D <= 0):
            return SddmReport(False, "non-positive diagonal entry",
                              tuple(np.nonzero(D <= 0)[0]))
    slack = D - rowsum
    tol = _SDDM_RTOL * np.maximum(D, 1.0)
    bad = np.nonzero(slack < -tol)[0]
    if bad.size:
        return SddmReport(False, "diagonal dominance violated", tuple(bad))
    return SddmReport(True)


def bfs_distances(graph, source):
    """Hop distances from source; unreachable nodes get -1."""
    dist = np.full(graph.n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in graph.neighbors(u):
                if dist[v] < 0:
                    dist[v] = d
                    nxt.append(int(v))
        frontier = nxt
    return dist


def is_connected(graph):
    if graph.n == 0:
        return True
    return bool(np.all(bfs_distances(graph, 0) >= 0))


def component_labels(graph):
    """Connected-component label per node (0-based, in discovery order)."""
    label = np.full(graph.n, -1, dtype=np.int64)
    cur = 0
    for s in range(graph.n):
        if label[s] >= 0:
            continue
        label[s] = cur
        stack = [s]
        while stack:
            u = stack.pop()
            for v in graph.neighbors(u):
                if label[v] < 0:
                    label[v] = cur
                    stack.append(int(v))
        cur += 1
    return label


def is_bipartite(graph):
    color = np.full(graph.n, -1, dtype=np.int8)
    for s in range(graph.n):
        if color[s] >= 0:
            continue
        color[s] = 0
        stack = [s]
        while stack:
            u = stack.pop()
            for v in graph.neighbors(u):
                if color[v] < 0:
                    color[v] = 1 - color[u]
                    stack.append(int(v))
                elif color[v] == color[u]:
                    return False
    return True


def estimate_diameter_pair(graph):
    """BFS double sweep: returns (u, v, estimated diameter)."""
    d0 = bfs_distances(graph, 0)
    u = int(np.argmax(d0))
    du = bfs_distances(graph, u)
    v = int(np.argmax(du))
    return u, v, int(du[v])


def r_hop_neighborhood(graph, k, R):
    """Sorted node ids within R hops of k (k included)."""
    if R < 0:
        raise ParameterError("hop radius must be non-negative")
    dist = bfs_distances(graph, k)
    return np.nonzero((dist >= 0) & (dist <= R))[0]


def rhop_size_bound(n, d_max, R):
    """beta = min(n, (d_max^(R+1) - 1) / (d_max - 1))."""
    if d_max <= 1:
        return min(n, R + 1)
    return min(n, (d_max ** (R + 1) - 1) // (d_max - 1))


def laplacian(graph):
    """Weighted graph Laplacian as a standard splitting."""
    deg = np.zeros(graph.n)
    np.add.at(deg, graph.edges[:, 0], graph.weights)
    np.add.at(deg, graph.edges[:, 1], graph.weights)
    return SplitMatrix.from_parts(deg, graph.adj_ptr, graph.adj_ind,
                                  graph.adj_wts)


@dataclass(frozen=True)
class GroundingMap:
    grounded_node: int
    kept: np.ndarray  # original indices of the retained coordinates

    def embed(self, x_reduced, n=None):
        """Lift a grounded solution back to n coordinates with 0 at the
        grounded node."""
        n = self.kept.shape[0] + 1 if n is None else n
        full = np.zeros(n)
        full[self.kept] = x_reduced
        return full

    def restrict(self, v):
        return v[self.kept]


def default_ground_node(graph):
    """Lowest-index node of maximum degree."""
    deg = graph.degrees()
    return int(np.argmax(deg))


def ground(L, g):
    """Delete row/column g of a connected-graph Laplacian.

    The result is a nonsingular SDDM matrix; the returned map embeds reduced
    solutions back to n coordinates with the grounded coordinate fixed to 0.
    """
    if g < 0 or g >= L.n:
        raise ParameterError("grounding node out of range")
    if not is_connected(L.support_graph()):
        raise StructureError("grounding a disconnected Laplacian would "
                             "leave a singular system")
    kept = np.concatenate([np.arange(g), np.arange(g + 1, L.n)])
    remap = np.full(L.n, -1, dtype=np.int64)
    remap[kept] = np.arange(L.n - 1)
    ptr = [0]
    ind = []
    dat = []
    for k in kept:
        cols, vals = L.row(k)
        keep = cols != g
        ind.append(remap[cols[keep]])
        dat.append(vals[keep])
        ptr.append(ptr[-1] + int(keep.sum()))
    M = SplitMatrix.from_parts(
        L.D[kept],
        np.array(ptr, dtype=np.int64),
        np.concatenate(ind) if ind else np.zeros(0, dtype=np.int64),
        np.concatenate(dat) if dat else np.zeros(0))
    return M, GroundingMap(g, kept)


def _weight_extremes(M):
    if M.nnz:
        return float(M.data.max()), float(M.data.min())
    # diagonal matrix: fall back to the diagonal spread
    return float(M.D.max()), float(M.D.min())


def spectral_summary(M, mode="exact"):
    """Spectral range and condition number of an SDDM splitting.

    mode="exact" densifies and solves the symmetric eigenproblem (capped at
    n=2000); kappa is taken over nonzero eigenvalues so singular Laplacians
    report their effective condition number. mode="bound" applies the
    n^3 W_max/W_min bound for Laplacians and n^4 W_max/W_min for grounded
    submatrices.
    """
    if mode == "bound":
        wmax, wmin = _weight_extremes(M)
        slack = M.D - M.offdiag_row_sums()
        tol = _SDDM_RTOL * np.maximum(M.D, 1.0)
        power = 3 if np.all(slack <= tol) else 4
        kappa = max(1.0, float(M.n) ** power * wmax / wmin)
        mu_max = 2.0 * float(M.D.max())
        return SpectralSummary(mu_max / kappa, mu_max, kappa, "bound")
    if mode != "exact":
        raise ParameterError(f"unknown spectral mode {mode!r}")
    if M.n > DENSE_ORACLE_CAP:
        raise ParameterError(
            f"exact spectral mode capped at n={DENSE_ORACLE_CAP}; "
            "use mode='bound'")
    eig = scipy.linalg.eigvalsh(M.to_dense())
    mu_max = float(eig[-1])
    tol = max(M.n, 1) * np.finfo(float).eps * max(mu_max, 1.0)
    nz = eig[eig > tol]
    if nz.size == 0:
        raise StructureError("matrix has no nonzero eigenvalues")
    mu_min = float(nz[0])
    return SpectralSummary(mu_min, mu_max, mu_max / mu_min, "exact")


@dataclass(frozen=True)
class NetworkInstance:
    graph: WeightedGraph
    network: DirectedNetwork
    b: np.ndarray
    seed: int


def generate_random_network(n, m, seed, weight_range=(1.0, 2.0),
                            supply_scale=1.0, require_non_bipartite=True):
    """Random connected network: spanning tree plus uniform extra edges.

    Arc directions are fair coin flips; the supply vector places a unit
    source/sink (scaled by supply_scale) on a BFS-estimated diameter pair.
    PRNG is numpy's PCG64; output is bit-reproducible for a fixed seed.
    """
    lo, hi = weight_range
    if n < 1 or m < n - 1 or m > n * (n - 1) // 2:
        raise ParameterError(f"infeasible (n={n}, m={m}) combination")
    if not (0 < lo <= hi):
        raise ParameterError("weight_range must lie in (0, inf)")

    for attempt in range(100):
        rng = np.random.default_rng((seed, attempt))
        order = rng.permutation(n)
        taken = set()
        for i in range(1, n):
            a, bnode = int(order[i]), int(order[rng.integers(0, i)])
            taken.add((min(a, bnode), max(a, bnode)))
        pairs = sorted(taken)
        extra = m - (n - 1)
        if extra > 0:
            pool = np.array([(i, j) for i in range(n) for j in range(i + 1, n)
                             if (i, j) not in taken], dtype=np.int64)
            pick = rng.choice(pool.shape[0], size=extra, replace=False)
            pairs = sorted(pairs + [tuple(p) for p in pool[np.sort(pick)]])
        pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        weights = rng.uniform(lo, hi, size=pairs.shape[0])
        flips = rng.integers(0, 2, size=pairs.shape[0])
        graph = WeightedGraph.from_edges(n, pairs, weights)
        if require_non_bipartite and m >= n and is_bipartite(graph) and n > 2:
            continue
        break

    arcs = np.where(flips[:, None] == 1, pairs[:, ::-1], pairs)
    network = DirectedNetwork.from_arcs(n, arcs)
    b = np.zeros(n)
    if n >= 2:
        u, v, _ = estimate_diameter_pair(graph)
        b[u] = supply_scale
        b[v] = -supply_scale
    return NetworkInstance(graph, network, b, seed)
