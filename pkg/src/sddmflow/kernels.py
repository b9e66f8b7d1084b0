"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

Backend selection is controlled by the ``SDDMFLOW_BACKEND`` environment
variable: ``auto`` (default; numba if importable), ``numba``, or ``numpy``.
Both backends accumulate row sums in ascending column order so results are
reproducible and, in practice, bit-identical across backends.

All sparse matrices use raw CSR triples (indptr, indices, data) of
int64/float64 arrays; rows keep their column indices sorted.
"""

import os

import numpy as np

BACKEND_ENV = "SDDMFLOW_BACKEND"


def _csr_matvec_py(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    out = np.zeros(n)
    if data.shape[0] == 0:
        return out
    prod = data * x[indices]
    nonempty = indptr[:-1] < indptr[1:]
    if prod.shape[0]:
        out[nonempty] = np.add.reduceat(prod, indptr[:-1][nonempty])
    return out


def _csr_matvec_nb(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = acc
    return out


def _csr_spgemm_py(aptr, aind, adat, bptr, bind, bdat, n):
    # Row-by-row product C = A @ B with a dense scratch row; column indices of
    # every output row are emitted sorted, so summation order is fixed.
    scratch = np.zeros(n)
    touched = np.zeros(n, dtype=np.bool_)
    cptr = np.zeros(aptr.shape[0], dtype=np.int64)
    rows_ind = []
    rows_dat = []
    for i in range(aptr.shape[0] - 1):
        cols = []
        for p in range(aptr[i], aptr[i + 1]):
            r = aind[p]
            v = adat[p]
            for q in range(bptr[r], bptr[r + 1]):
                j = bind[q]
                if not touched[j]:
                    touched[j] = True
                    cols.append(j)
                scratch[j] += v * bdat[q]
        cols.sort()
        rows_ind.append(np.array(cols, dtype=np.int64))
        rows_dat.append(scratch[cols].copy() if cols else np.zeros(0))
        for j in cols:
            scratch[j] = 0.0
            touched[j] = False
        cptr[i + 1] = cptr[i] + len(cols)
    cind = np.concatenate(rows_ind) if rows_ind else np.zeros(0, dtype=np.int64)
    cdat = np.concatenate(rows_dat) if rows_dat else np.zeros(0)
    return cptr, cind, cdat


def _csr_spgemm_nb(aptr, aind, adat, bptr, bind, bdat, n):
    nrows = aptr.shape[0] - 1
    scratch = np.zeros(n)
    touched = np.zeros(n, dtype=np.bool_)
    cols = np.empty(n, dtype=np.int64)

    # pass 1: count output nnz per row
    cptr = np.zeros(nrows + 1, dtype=np.int64)
    for i in range(nrows):
        cnt = 0
        for p in range(aptr[i], aptr[i + 1]):
            r = aind[p]
            for q in range(bptr[r], bptr[r + 1]):
                j = bind[q]
                if not touched[j]:
                    touched[j] = True
                    cols[cnt] = j
                    cnt += 1
        for t in range(cnt):
            touched[cols[t]] = False
        cptr[i + 1] = cptr[i] + cnt

    cind = np.empty(cptr[nrows], dtype=np.int64)
    cdat = np.empty(cptr[nrows])

    # pass 2: accumulate and emit rows in sorted column order
    for i in range(nrows):
        cnt = 0
        for p in range(aptr[i], aptr[i + 1]):
            r = aind[p]
            v = adat[p]
            for q in range(bptr[r], bptr[r + 1]):
                j = bind[q]
                if not touched[j]:
                    touched[j] = True
                    cols[cnt] = j
                    cnt += 1
                scratch[j] += v * bdat[q]
        row = np.sort(cols[:cnt])
        base = cptr[i]
        for t in range(cnt):
            j = row[t]
            cind[base + t] = j
            cdat[base + t] = scratch[j]
            scratch[j] = 0.0
            touched[j] = False
    return cptr, cind, cdat


PY_KERNELS = {"csr_matvec": _csr_matvec_py, "csr_spgemm": _csr_spgemm_py}

NB_KERNELS = None


def _build_numba_kernels():
    from numba import njit

    return {
        "csr_matvec": njit(cache=True)(_csr_matvec_nb),
        "csr_spgemm": njit(cache=True)(_csr_spgemm_nb),
    }


def _select_backend():
    global NB_KERNELS
    mode = os.environ.get(BACKEND_ENV, "auto").lower()
    if mode not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown {BACKEND_ENV} value: {mode!r}")
    if mode == "numpy":
        return "numpy", PY_KERNELS
    try:
        NB_KERNELS = _build_numba_kernels()
        return "numba", NB_KERNELS
    except ImportError:
        if mode == "numba":
            raise
        return "numpy", PY_KERNELS


_BACKEND_NAME, _KERNELS = _select_backend()


def backend_name():
    return _BACKEND_NAME


def csr_matvec(indptr, indices, data, x):
    """y = P @ x for a CSR matrix P; rows are summed in column order."""
    return _KERNELS["csr_matvec"](indptr, indices, data, x)


def csr_spgemm(aptr, aind, adat, bptr, bind, bdat, n):
    """CSR product A @ B (both n columns); output rows sorted by column."""
    return _KERNELS["csr_spgemm"](aptr, aind, adat, bptr, bind, bdat, n)
