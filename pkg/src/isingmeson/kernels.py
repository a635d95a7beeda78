"""Gate-application kernels on batched statevectors.

Arrays are shaped ``(2**n, ncol)`` with qubit 0 as the most significant bit
of the row index; every column is transformed independently.  The same
kernels serve single states (``ncol == 1``), dense operators (one column per
basis vector) and vectorized density matrices (``2n`` qubits).

Two interchangeable backends exist: numba ``@njit`` loops and a pure-numpy
path built on reshapes.  Setting ``ISINGMESON_NO_NUMBA=1`` (or a missing numba
install) selects numpy.  Both backends update ``psi`` in place.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("ISINGMESON_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLE:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag in benchmarks
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# numpy reference path
# --------------------------------------------------------------------------

def _np_apply_1q(psi, u, q, n):
    v = psi.reshape(1 << q, 2, -1)
    v[:] = np.einsum("ab,ibj->iaj", u, v)


def _np_apply_2q(psi, u, q, n):
    v = psi.reshape(1 << q, 4, -1)
    v[:] = np.einsum("ab,ibj->iaj", u, v)


def _np_apply_diag_1q(psi, d, q, n):
    v = psi.reshape(1 << q, 2, -1)
    v *= d[None, :, None]


def _np_apply_diag_2q(psi, d, q, n):
    v = psi.reshape(1 << q, 4, -1)
    v *= d[None, :, None]


def _np_depolarize_1q(rho, p, q, n):
    # rho is vec(rho) over 2n qubits: row qubit q, column qubit n + q
    v = rho.reshape(1 << q, 2, 1 << (n - 1), 2, -1)
    avg = 0.5 * (v[:, 0, :, 0] + v[:, 1, :, 1])
    v *= 1.0 - p
    v[:, 0, :, 0] += p * avg
    v[:, 1, :, 1] += p * avg


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, fastmath=True)
    def _nb_apply_1q(psi, u, q, n):
        dim, ncol = psi.shape
        s = 1 << (n - 1 - q)
        u00, u01, u10, u11 = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
        for blk in range(0, dim, 2 * s):
            for i in range(blk, blk + s):
                r0 = psi[i]
                r1 = psi[i + s]
                for c in range(ncol):
                    a = r0[c]
                    b = r1[c]
                    r0[c] = u00 * a + u01 * b
                    r1[c] = u10 * a + u11 * b

    @njit(cache=True, fastmath=True)
    def _nb_apply_2q(psi, u, q, n):
        dim, ncol = psi.shape
        hi = 1 << (n - 1 - q)
        lo = hi >> 1
        u00, u01, u02, u03 = u[0, 0], u[0, 1], u[0, 2], u[0, 3]
        u10, u11, u12, u13 = u[1, 0], u[1, 1], u[1, 2], u[1, 3]
        u20, u21, u22, u23 = u[2, 0], u[2, 1], u[2, 2], u[2, 3]
        u30, u31, u32, u33 = u[3, 0], u[3, 1], u[3, 2], u[3, 3]
        for blk in range(0, dim, 2 * hi):
            for i in range(blk, blk + lo):
                r0 = psi[i]
                r1 = psi[i + lo]
                r2 = psi[i + hi]
                r3 = psi[i + hi + lo]
                for c in range(ncol):
                    a0 = r0[c]
                    a1 = r1[c]
                    a2 = r2[c]
                    a3 = r3[c]
                    r0[c] = u00 * a0 + u01 * a1 + u02 * a2 + u03 * a3
                    r1[c] = u10 * a0 + u11 * a1 + u12 * a2 + u13 * a3
                    r2[c] = u20 * a0 + u21 * a1 + u22 * a2 + u23 * a3
                    r3[c] = u30 * a0 + u31 * a1 + u32 * a2 + u33 * a3

    @njit(cache=True, fastmath=True)
    def _nb_apply_diag_1q(psi, d, q, n):
        dim, ncol = psi.shape
        s = 1 << (n - 1 - q)
        # rows come in contiguous runs of length s sharing one phase
        for start in range(0, dim, s):
            f = d[(start // s) & 1]
            blk = psi[start:start + s]
            for i in range(s):
                for c in range(ncol):
                    blk[i, c] *= f

    @njit(cache=True, fastmath=True)
    def _nb_apply_diag_2q(psi, d, q, n):
        dim, ncol = psi.shape
        lo = 1 << (n - 2 - q)
        for start in range(0, dim, lo):
            f = d[(start // lo) & 3]
            blk = psi[start:start + lo]
            for i in range(lo):
                for c in range(ncol):
                    blk[i, c] *= f

    @njit(cache=True)
    def _nb_depolarize_1q(rho, p, q, n):
        dim, ncol = rho.shape
        sr = 1 << (2 * n - 1 - q)
        sc = 1 << (n - 1 - q)
        keep = 1.0 - p
        for i in range(dim):
            if (i & sr) or (i & sc):
                continue
            i11 = i + sr + sc
            for c in range(ncol):
                a = rho[i, c]
                b = rho[i11, c]
                avg = 0.5 * (a + b)
                rho[i, c] = keep * a + p * avg
                rho[i11, c] = keep * b + p * avg
            for c in range(ncol):
                rho[i + sr, c] *= keep
                rho[i + sc, c] *= keep

    apply_1q = _nb_apply_1q
    apply_2q = _nb_apply_2q
    apply_diag_1q = _nb_apply_diag_1q
    apply_diag_2q = _nb_apply_diag_2q
    depolarize_1q = _nb_depolarize_1q
else:
    apply_1q = _np_apply_1q
    apply_2q = _np_apply_2q
    apply_diag_1q = _np_apply_diag_1q
    apply_diag_2q = _np_apply_diag_2q
    depolarize_1q = _np_depolarize_1q

NUMPY_KERNELS = {
    "apply_1q": _np_apply_1q,
    "apply_2q": _np_apply_2q,
    "apply_diag_1q": _np_apply_diag_1q,
    "apply_diag_2q": _np_apply_diag_2q,
    "depolarize_1q": _np_depolarize_1q,
}
ACTIVE_KERNELS = {
    "apply_1q": apply_1q,
    "apply_2q": apply_2q,
    "apply_diag_1q": apply_diag_1q,
    "apply_diag_2q": apply_diag_2q,
    "depolarize_1q": depolarize_1q,
}


def as_batch(psi: np.ndarray) -> np.ndarray:
    """Return a C-contiguous complex ``(dim, ncol)`` copy of ``psi``."""
    arr = np.array(psi, dtype=np.complex128, order="C", copy=True)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr
