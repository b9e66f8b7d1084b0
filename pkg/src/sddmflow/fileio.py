"""Serialization: Matrix Market, network/problem JSON, trace CSV, chain dumps.

File formats are documented in docs/cli.md. Trace CSVs start with
``# key=value`` header lines followed by the fixed column set
``k,q,f,feas,gnormL,phase,messages,rounds,ms``; all floats are written with
repr-level precision so reruns of a seeded config produce identical bytes
(wall-clock ms aside).
"""

import json
import os

import numpy as np
import scipy.io
import scipy.sparse

from .errors import StructureError
from .graphs import (DirectedNetwork, NetworkInstance, SplitMatrix,
                     WeightedGraph)
from .netflow import CostFunction, FlowProblem

TRACE_COLUMNS = ("k", "q", "f", "feas", "gnormL", "phase", "messages",
                 "rounds", "ms")


def save_split_matrix_mm(M, path):
    """Matrix Market coordinate export of the assembled SDDM matrix."""
    rows = np.repeat(np.arange(M.n), np.diff(M.indptr))
    coo = scipy.sparse.coo_matrix(
        (np.concatenate([M.D, -M.data]),
         (np.concatenate([np.arange(M.n), rows]),
          np.concatenate([np.arange(M.n), M.indices]))),
        shape=(M.n, M.n))
    scipy.io.mmwrite(path, coo, symmetry="symmetric")


def load_split_matrix_mm(path):
    mat = scipy.io.mmread(path)
    if mat.shape[0] != mat.shape[1]:
        raise StructureError("matrix market file is not square")
    coo = scipy.sparse.coo_matrix(mat)
    csr = coo.tocsr()
    D = csr.diagonal().copy()
    off = csr - scipy.sparse.diags(D)
    off = (-off).tocsr()
    off.sort_indices()
    return SplitMatrix.from_parts(D, off.indptr.astype(np.int64),
                                  off.indices.astype(np.int64),
                                  off.data.astype(np.float64))


def save_vector(v, path):
    np.savetxt(path, np.asarray(v, dtype=np.float64))


def load_vector(path):
    return np.atleast_1d(np.loadtxt(path, dtype=np.float64))


def network_to_dict(inst, cost=None):
    """Graph/network JSON object (0-based ids)."""
    out = {
        "version": 1,
        "n": inst.graph.n,
        "edges": [[int(i), int(j), float(w)] for (i, j), w
                  in zip(inst.graph.edges, inst.graph.weights)],
        "arcs": [[int(s), int(t)] for s, t in inst.network.arcs],
        "b": [float(v) for v in inst.b],
        "seed": inst.seed,
    }
    if cost is not None:
        out["costs"] = cost_to_list(cost)
    return out


def cost_to_list(cost):
    out = []
    for e in range(cost.num_edges):
        if cost.kind == "quadratic":
            out.append({"kind": "quadratic", "a": float(cost.a[e]),
                        "c": float(cost.c[e])})
        else:
            out.append({"kind": "smoothed", "a": float(cost.a[e]),
                        "s": float(cost.s[e])})
    return out


def cost_from_list(items):
    kinds = {it["kind"] for it in items}
    if len(kinds) != 1:
        raise StructureError("mixed cost kinds are not supported")
    kind = kinds.pop()
    a = np.array([it["a"] for it in items])
    if kind == "quadratic":
        return CostFunction.quadratic(
            a, np.array([it.get("c", 0.0) for it in items]))
    if kind == "smoothed":
        return CostFunction.smoothed(a, np.array([it["s"] for it in items]))
    raise StructureError(f"unknown cost kind {kind!r}")


def network_from_dict(obj):
    n = int(obj["n"])
    edges = np.array([[e[0], e[1]] for e in obj["edges"]], dtype=np.int64)
    weights = np.array([e[2] for e in obj["edges"]])
    graph = WeightedGraph.from_edges(n, edges, weights)
    network = DirectedNetwork.from_arcs(n, np.array(obj["arcs"],
                                                    dtype=np.int64))
    b = np.array(obj["b"], dtype=np.float64)
    inst = NetworkInstance(graph, network, b, int(obj.get("seed", -1)))
    cost = cost_from_list(obj["costs"]) if "costs" in obj else None
    return inst, cost


def save_problem_json(path, inst, cost):
    with open(path, "w") as fh:
        json.dump(network_to_dict(inst, cost), fh, indent=1)
        fh.write("\n")


def load_problem_json(path):
    with open(path) as fh:
        obj = json.load(fh)
    inst, cost = network_from_dict(obj)
    problem = None
    if cost is not None:
        problem = FlowProblem.create(inst.network, cost, inst.b)
    return inst, problem


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_trace_csv(trace, path, cost_summary=None):
    with open(path, "w") as fh:
        for key, val in trace.header.items():
            fh.write(f"# {key}={val}\n")
        if cost_summary is not None:
            fh.write(f"# cost={json.dumps(cost_summary)}\n")
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for r in trace.rows:
            fh.write(",".join([
                str(r.k), repr(r.q), repr(r.f), repr(r.feas),
                repr(r.gnorm_L), r.phase, str(r.messages), str(r.rounds),
                f"{r.ms:.3f}"]) + "\n")


def read_trace_csv(path):
    """Returns (header dict, list of row dicts)."""
    header = {}
    rows = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    body_at = None
    for i, line in enumerate(lines):
        if line.startswith("# "):
            key, _, val = line[2:].partition("=")
            header[key] = val
        else:
            body_at = i
            break
    if body_at is None or lines[body_at] != ",".join(TRACE_COLUMNS):
        raise StructureError(f"{path}: missing trace column header")
    for line in lines[body_at + 1:]:
        if not line:
            continue
        parts = line.split(",")
        rows.append({
            "k": int(parts[0]), "q": float(parts[1]), "f": float(parts[2]),
            "feas": float(parts[3]), "gnormL": float(parts[4]),
            "phase": parts[5], "messages": int(parts[6]),
            "rounds": int(parts[7]), "ms": float(parts[8])})
    return header, rows


def export_chain(chain, outdir, seed=None, kappa=None):
    """Debug dump: dense chain levels as Matrix Market plus a manifest."""
    os.makedirs(outdir, exist_ok=True)
    for i in range(chain.d + 1):
        Di, Ai = chain.level_dense(i)
        scipy.io.mmwrite(os.path.join(outdir, f"level_{i:02d}.mtx"),
                         scipy.sparse.coo_matrix(Di - Ai),
                         symmetry="symmetric")
    manifest = {
        "d": chain.d,
        "epsilons": [float(e) for e in chain.epsilons],
        "eps_d_measured": chain.eps_d_measured,
        "kappa": kappa if kappa is not None else chain.kappa_bound,
        "seed": seed,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def import_chain(outdir):
    from .chain import build_exact_chain
    with open(os.path.join(outdir, "manifest.json")) as fh:
        manifest = json.load(fh)
    M0 = load_split_matrix_mm(os.path.join(outdir, "level_00.mtx"))
    return build_exact_chain(M0, manifest["d"]), manifest
