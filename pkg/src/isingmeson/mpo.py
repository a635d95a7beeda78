"""Matrix product operators for evolution targets and brickwall overlaps.

Site tensors are indexed ``(left, out, in, right)``.  The chain is kept in
mixed-canonical form (as a vectorized operator with physical dimension 4) so
that SVD truncation at a relative singular-value tolerance is well defined.
"""
from __future__ import annotations

import math

import numpy as np

from .compress import BrickwallAnsatz, bond_hamiltonians, _expm_herm
from .model import ModelSpec

# fourth-order composition of symmetric second-order steps
_CBRT2 = 2.0 ** (1.0 / 3.0)
YOSHIDA = (1.0 / (2.0 - _CBRT2), -_CBRT2 / (2.0 - _CBRT2), 1.0 / (2.0 - _CBRT2))


class MPOToleranceError(RuntimeError):
    """Requested tolerance needs a bond dimension above the configured cap."""


class MPOperator:
    def __init__(self, site_tensors, tol: float = 1e-10, max_bond: int = 64):
        self.site_tensors = [np.asarray(t, dtype=np.complex128) for t in site_tensors]
        if self.site_tensors[0].shape[0] != 1 or self.site_tensors[-1].shape[3] != 1:
            raise ValueError("boundary bond dimensions must be 1")
        self.tol = float(tol)
        self.max_bond = int(max_bond)
        self.truncation_error = 0.0
        self.center: int | None = None

    @property
    def L(self) -> int:
        return len(self.site_tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[3] for t in self.site_tensors[:-1]]

    @classmethod
    def identity(cls, L: int, tol: float = 1e-10, max_bond: int = 64) -> "MPOperator":
        eye = np.eye(2, dtype=np.complex128).reshape(1, 2, 2, 1)
        op = cls([eye.copy() for _ in range(L)], tol=tol, max_bond=max_bond)
        op.center = 0
        return op

    @classmethod
    def from_dense(cls, U: np.ndarray, tol: float = 1e-12, max_bond: int = 4096) -> "MPOperator":
        L = int(round(math.log2(U.shape[0])))
        T = U.reshape([2] * (2 * L))
        # interleave (o1, i1, o2, i2, ...)
        T = T.transpose([k for s in range(L) for k in (s, L + s)])
        tensors = []
        rest = T.reshape(1, -1)
        for s in range(L - 1):
            Dl = rest.shape[0]
            mat = rest.reshape(Dl * 4, -1)
            u, sv, vh = np.linalg.svd(mat, full_matrices=False)
            keep = max(1, int(np.sum(sv > tol * sv[0])))
            tensors.append(u[:, :keep].reshape(Dl, 2, 2, keep))
            rest = sv[:keep, None] * vh[:keep]
        tensors.append(rest.reshape(rest.shape[0], 2, 2, 1))
        op = cls(tensors, tol=tol, max_bond=max_bond)
        op.center = L - 1
        return op

    def copy(self) -> "MPOperator":
        op = MPOperator([t.copy() for t in self.site_tensors], tol=self.tol, max_bond=self.max_bond)
        op.truncation_error = self.truncation_error
        op.center = self.center
        return op

    def dagger(self) -> "MPOperator":
        op = MPOperator([t.conj().transpose(0, 2, 1, 3) for t in self.site_tensors],
                        tol=self.tol, max_bond=self.max_bond)
        op.truncation_error = self.truncation_error
        op.center = self.center
        return op

    # ---- canonical form -------------------------------------------------

    def _canonicalize(self) -> None:
        self.center = self.L - 1
        for s in range(self.L - 1):
            self._shift_right(s)
        self.center = self.L - 1

    def _shift_right(self, s: int) -> None:
        A = self.site_tensors[s]
        Dl, _, _, Dr = A.shape
        q, r = np.linalg.qr(A.reshape(Dl * 4, Dr))
        self.site_tensors[s] = q.reshape(Dl, 2, 2, q.shape[1])
        self.site_tensors[s + 1] = np.tensordot(r, self.site_tensors[s + 1], axes=(1, 0))

    def _shift_left(self, s: int) -> None:
        A = self.site_tensors[s]
        Dl, _, _, Dr = A.shape
        q, r = np.linalg.qr(A.reshape(Dl, 4 * Dr).T)
        self.site_tensors[s] = q.T.reshape(q.shape[1], 2, 2, Dr)
        self.site_tensors[s - 1] = np.tensordot(self.site_tensors[s - 1], r.T, axes=(3, 0))

    def move_center(self, j: int) -> None:
        if self.center is None:
            self._canonicalize()
        while self.center < j:
            self._shift_right(self.center)
            self.center += 1
        while self.center > j:
            self._shift_left(self.center)
            self.center -= 1

    # ---- gates ----------------------------------------------------------

    def apply_gate(self, i: int, G: np.ndarray, side: str = "out") -> None:
        """``G X`` on sites ``(i, i+1)`` (``side='out'``) or ``X G`` (``side='in'``)."""
        if self.center not in (i, i + 1):
            self.move_center(i)
        A, B = self.site_tensors[i], self.site_tensors[i + 1]
        Dl, Dr = A.shape[0], B.shape[3]
        th = np.tensordot(A, B, axes=(3, 0))  # (l, o1, i1, o2, i2, r)
        g = G.reshape(2, 2, 2, 2)
        if side == "out":
            th = np.einsum("abcd,lcxdyr->laxbyr", g, th)
        elif side == "in":
            th = np.einsum("lxcydr,cdab->lxaybr", th, g)
        else:
            raise ValueError("side must be 'out' or 'in'")
        u, s, vh = np.linalg.svd(th.reshape(Dl * 4, 4 * Dr), full_matrices=False)
        keep = max(1, int(np.sum(s > self.tol * s[0])))
        if keep > self.max_bond:
            raise MPOToleranceError(f"bond ({i + 1},{i + 2}) needs dimension {keep} > cap {self.max_bond}")
        norm2 = float(np.sum(s ** 2))
        if keep < len(s):
            self.truncation_error += float(np.sum(s[keep:] ** 2)) / norm2
        self.site_tensors[i] = u[:, :keep].reshape(Dl, 2, 2, keep)
        self.site_tensors[i + 1] = (s[:keep, None] * vh[:keep]).reshape(keep, 2, 2, Dr)
        self.center = i + 1

    def apply_layer(self, L_idx: int, gates, side: str = "out", dagger: bool = False) -> None:
        bonds = BrickwallAnsatz.bonds(self.L, L_idx)
        pairs = list(zip(bonds, gates))
        if self.center is not None and self.center > self.L // 2:
            pairs = pairs[::-1]
        for i, g in pairs:
            self.apply_gate(i, g.conj().T if dagger else g, side)

    # ---- contractions ---------------------------------------------------

    def trace(self) -> complex:
        v = np.ones(1, dtype=np.complex128)
        for t in self.site_tensors:
            v = v @ np.einsum("loor->lr", t)
        return complex(v[0])

    def to_dense(self) -> np.ndarray:
        if self.L > 12:
            raise ValueError("dense contraction limited to L <= 12")
        T = self.site_tensors[0][0]  # (o, i, r)
        for t in self.site_tensors[1:]:
            T = np.tensordot(T, t, axes=(-1, 0))
        T = T[..., 0]
        L = self.L
        T = T.transpose(list(range(0, 2 * L, 2)) + list(range(1, 2 * L, 2)))
        return T.reshape(1 << L, 1 << L)


def evolution_mpo(spec: ModelSpec, t: float, tol: float = 1e-10, max_bond: int = 64,
                  steps_per_unit: int = 100) -> MPOperator:
    """``exp(-iHt)`` as a product of fine second-order steps with fourth-order weights.

    Each step of size ``tau`` is the symmetric product E(tau/2) O(tau) E(tau/2)
    of bond exponentials; three such steps with Yoshida weights give a
    fourth-order step.  ``n = ceil(|t| * steps_per_unit)`` steps are taken.
    """
    op = MPOperator.identity(spec.L, tol=tol, max_bond=max_bond)
    n = int(math.ceil(abs(t) * steps_per_unit - 1e-12))
    if n == 0:
        return op
    tau = t / n
    hs = bond_hamiltonians(spec)
    cache: dict[tuple[int, float], list[np.ndarray]] = {}

    def layer(parity: int, s: float):
        key = (parity, s)
        if key not in cache:
            cache[key] = [_expm_herm(hs[i], s) for i in BrickwallAnsatz.bonds(spec.L, parity)]
        return cache[key]

    for _ in range(n):
        for w in YOSHIDA:
            s = w * tau
            op.apply_layer(0, layer(0, s / 2))
            op.apply_layer(1, layer(1, s))
            op.apply_layer(0, layer(0, s / 2))
    return op


def mpo_overlap(target: MPOperator, W: BrickwallAnsatz) -> complex:
    """``Tr(U^dagger W)`` by absorbing the circuit into ``U^dagger`` gate by gate."""
    X = target.dagger()
    for l in range(W.n_layers - 1, -1, -1):
        X.apply_layer(l, W.gates[l], side="in")
    return X.trace()


def _layer_environments(N: MPOperator, l: int, gates) -> tuple[list[np.ndarray], complex]:
    L = N.L
    bonds = BrickwallAnsatz.bonds(L, l)
    gate_at = dict(zip(bonds, gates))
    blocks: list[tuple[str, int]] = []
    s = 0
    while s < L:
        if s in gate_at:
            blocks.append(("pair", s))
            s += 2
        else:
            blocks.append(("site", s))
            s += 1
    T = N.site_tensors

    def pair_tensor(i):
        return np.tensordot(T[i], T[i + 1], axes=(3, 0))  # (l, o1, i1, o2, i2, r)

    def closed(kind, i):
        if kind == "site":
            return np.einsum("loor->lr", T[i])
        g = gate_at[i].reshape(2, 2, 2, 2)  # (in1', in2', out1', out2') role: L[in, out]
        return np.einsum("lacbdr,cdab->lr", pair_tensor(i), g)

    mats = [closed(k, i) for k, i in blocks]
    left = [np.ones(1, dtype=np.complex128)]
    for m in mats:
        left.append(left[-1] @ m)
    right = [np.ones(1, dtype=np.complex128)]
    for m in reversed(mats):
        right.append(m @ right[-1])
    right = right[::-1]
    envs = []
    for b, (kind, i) in enumerate(blocks):
        if kind != "pair":
            continue
        P = pair_tensor(i)
        X = np.einsum("l,lacbdr,r->abcd", left[b], P, right[b + 1]).reshape(4, 4)
        envs.append(X.conj().T)
    return envs, complex(left[-1][0])


def mpo_environments(target: MPOperator, W: BrickwallAnsatz):
    """Hole environments for every gate, swept as in the dense path."""
    n = W.n_layers
    N = target.dagger()
    for l in range(n - 1, 0, -1):
        N.apply_layer(l, W.gates[l], side="in")
    envs = []
    tr = 0.0j
    for k in range(n):
        le, tr = _layer_environments(N, k, W.gates[k])
        envs.append(le)
        if k + 1 < n:
            N.apply_layer(k, W.gates[k], side="out")
            N.apply_layer(k + 1, W.gates[k + 1], side="in", dagger=True)
    return envs, tr
