"""Synthetic depolarizing noise, reference circuits and divide-by-reference mitigation.

Noise channels use the replacement form: with probability ``p`` the qubits a
gate touched are replaced by the maximally mixed state.  For one qubit this is
the Pauli channel with each of X, Y, Z applied at rate ``p / 4``.

Dense two-qubit gates are rewritten in the native set {RX, RZ, RZZ} through a
Cartan (KAK) decomposition so that reference circuits, which keep only the RZZ
angles, are defined for compressed circuits as well.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .circuit import (RX, RZ, RZZ, Circuit, Gate, apply_gate_batch, circuit_to_matrix,
                      point_seed, sample_expectation_z)
from .model import as_pattern, central_site, kink_state, z_table
from .series import TimeSeries, n_steps

MAX_DENSITY_L = 10
EPS_DEN = 0.05


@dataclass(frozen=True)
class NoiseModel:
    """``p1``/``p2`` per single/two-qubit gate, ``readout_flip`` per measured bit.

    ``global_depol`` is a toy channel ``rho -> (1 - lam) rho + lam I / d``
    applied once after every circuit segment (one Trotter step).
    """

    p1: float = 0.0
    p2: float = 0.0
    readout_flip: float = 0.0
    global_depol: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2", "readout_flip", "global_depol"):
            v = float(getattr(self, name))
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
            object.__setattr__(self, name, v)

    @property
    def is_noiseless(self) -> bool:
        return self.p1 == self.p2 == self.readout_flip == self.global_depol == 0.0


# --------------------------------------------------------------------------
# native decomposition
# --------------------------------------------------------------------------

_MAGIC = np.array([[1, 0, 0, 1j],
                   [0, 1j, 1, 0],
                   [0, 1j, -1, 0],
                   [1, 0, 0, -1j]], dtype=np.complex128) / np.sqrt(2.0)

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)
_S = np.diag([1.0, 1j])
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.diag([1.0, -1.0]).astype(np.complex128)

# diagonals of XX, YY, ZZ in the magic basis, plus the phase column
_MAGIC_DIAGS = np.stack([np.real(np.diag(_MAGIC.conj().T @ np.kron(P, P) @ _MAGIC))
                         for P in (_X, _Y, _Z)] + [np.ones(4)], axis=1)

# four Euler triples (3 sublayers each) around three RZZ sublayers
N_TEMPLATE_LAYERS = 15


def wrap_angle(a: float) -> float:
    """Map ``a`` into ``(-pi, pi]``."""
    w = float(np.remainder(a + np.pi, 2 * np.pi) - np.pi)
    return np.pi if w == -np.pi else w


def euler_zxz(u: np.ndarray) -> tuple[float, float, float]:
    """Angles ``(alpha, beta, gamma)`` with ``u ~ RZ(alpha) RX(beta) RZ(gamma)`` up to phase."""
    v = u / np.sqrt(np.linalg.det(u))
    c, s = abs(v[0, 0]), abs(v[1, 0])
    beta = 2.0 * np.arctan2(s, c)
    if s < 1e-14:
        plus, minus = -2.0 * np.angle(v[0, 0]), 0.0
    elif c < 1e-14:
        plus, minus = 0.0, 2.0 * (np.angle(v[1, 0]) + np.pi / 2)
    else:
        plus = -2.0 * np.angle(v[0, 0])
        minus = 2.0 * (np.angle(v[1, 0]) + np.pi / 2)
    alpha, gamma = 0.5 * (plus + minus), 0.5 * (plus - minus)
    return wrap_angle(alpha), wrap_angle(beta), wrap_angle(gamma)


def _kron_factor(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest ``a (x) b`` to ``A``; exact for local unitaries."""
    R = A.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(R)
    a = np.sqrt(s[0]) * u[:, 0].reshape(2, 2)
    b = np.sqrt(s[0]) * vh[0].reshape(2, 2)
    # normalise both to unit determinant; the phase lives in the global phase
    return a / np.sqrt(np.linalg.det(a)), b / np.sqrt(np.linalg.det(b))


@dataclass
class KAKDecomposition:
    """``U = phase * (a1 (x) a2) exp(i(x XX + y YY + z ZZ)) (b1 (x) b2)``."""

    before: tuple[np.ndarray, np.ndarray]
    interaction: tuple[float, float, float]
    after: tuple[np.ndarray, np.ndarray]
    phase: complex

    def matrix(self) -> np.ndarray:
        x, y, z = self.interaction
        core = np.zeros((4, 4), dtype=np.complex128)
        core += x * np.kron(_X, _X) + y * np.kron(_Y, _Y) + z * np.kron(_Z, _Z)
        w, v = np.linalg.eigh(core)
        ex = (v * np.exp(1j * w)) @ v.conj().T
        return self.phase * np.kron(*self.after) @ ex @ np.kron(*self.before)


def kak(U: np.ndarray, seed: int = 0) -> KAKDecomposition:
    """Cartan decomposition of a 4x4 unitary through the magic basis."""
    U = np.asarray(U, dtype=np.complex128)
    if U.shape != (4, 4):
        raise ValueError("kak needs a 4x4 matrix")
    det = np.linalg.det(U)
    V = U / det ** 0.25
    Up = _MAGIC.conj().T @ V @ _MAGIC
    M = Up.T @ Up
    # real and imaginary parts of a symmetric unitary commute; a generic real
    # combination separates degenerate eigenvalues of either part
    rng = np.random.default_rng(seed)
    for _ in range(16):
        r = rng.normal()
        _, P = np.linalg.eigh(M.real + r * M.imag)
        D = P.T @ M @ P
        if np.max(np.abs(D - np.diag(np.diag(D)))) < 1e-11:
            break
    else:  # pragma: no cover - happens with probability zero
        raise RuntimeError("failed to diagonalise the symmetric unitary")
    if np.linalg.det(P) < 0:
        P[:, 0] *= -1
    theta = 0.5 * np.angle(np.diag(D))
    K1 = Up @ P @ np.diag(np.exp(-1j * theta))
    if np.linalg.det(K1).real < 0:
        theta[0] += np.pi
        K1[:, 0] *= -1
    K1 = K1.real
    A = _MAGIC @ K1 @ _MAGIC.conj().T
    C = _MAGIC @ P.T @ _MAGIC.conj().T
    coef = np.linalg.solve(_MAGIC_DIAGS, theta)
    a1, a2 = _kron_factor(A)
    b1, b2 = _kron_factor(C)
    dec = KAKDecomposition((b1, b2), (float(coef[0]), float(coef[1]), float(coef[2])), (a1, a2), 1.0)
    # fix the overall phase against the input
    Vrec = dec.matrix()
    dec.phase = complex(np.trace(Vrec.conj().T @ U) / 4.0)
    dec.phase /= abs(dec.phase)
    return dec


def phase_distance(U: np.ndarray, V: np.ndarray) -> float:
    """Max-entry distance between ``U`` and ``V`` after aligning global phase by trace."""
    ov = np.trace(V.conj().T @ U)
    ph = ov / abs(ov) if abs(ov) > 1e-300 else 1.0
    return float(np.max(np.abs(U - ph * V)))


def _euler_layers(site: int, u1: np.ndarray, u2: np.ndarray) -> list[tuple[Gate, ...]]:
    a1, b1, c1 = euler_zxz(u1)
    a2, b2, c2 = euler_zxz(u2)
    # RZ(alpha) RX(beta) RZ(gamma) is applied gamma first
    return [(RZ(site, c1), RZ(site + 1, c2)),
            (RX(site, b1), RX(site + 1, b2)),
            (RZ(site, a1), RZ(site + 1, a2))]


def _is_diagonal(U: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(U - np.diag(np.diag(U)))) < tol)


def decompose_to_native(g: Gate) -> tuple[tuple[Gate, ...], ...]:
    """Rewrite one ``DENSE2Q`` gate as 15 native sublayers on its pair.

    Sublayer order (application order): Euler triple, RZZ, Euler triple,
    RZZ, Euler triple, RZZ, Euler triple.  The three RZZ factors carry the
    ZZ, YY and XX interaction in that order; the Euler triples absorb the
    outer local unitaries and the basis changes ``H S^dagger``, ``H S H`` and
    ``H``.  Diagonal gates skip the KAK step: they become one RZZ plus RZ
    corrections.  Zero angles stay in place so every gate shares the layout.
    """
    if g.kind != "DENSE2Q":
        raise ValueError("decompose_to_native expects a DENSE2Q gate")
    U = g.matrix
    s = g.sites[0]
    I2 = np.eye(2, dtype=np.complex128)
    if _is_diagonal(U):
        ph = np.angle(np.diag(U))
        # ph = c0 + c1 z1 + c2 z2 + c12 z1 z2 over z = (+,+), (+,-), (-,+), (-,-)
        zs = np.array([[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]], dtype=float)
        c0, c1, c2, c12 = zs.T @ ph / 4.0
        layers = _euler_layers(s, I2, I2)
        layers[0] = (RZ(s, wrap_angle(-2 * c1)), RZ(s + 1, wrap_angle(-2 * c2)))
        out = layers + [(RZZ(s, wrap_angle(-2 * c12)),)]
        for _ in range(2):
            out += _euler_layers(s, I2, I2) + [(RZZ(s, 0.0),)]
        out += _euler_layers(s, I2, I2)
        return tuple(out)
    dec = kak(U)
    x, y, z = dec.interaction
    Sd = _S.conj().T
    locals_ = [
        dec.before,
        (_H @ Sd, _H @ Sd),
        (_H @ _S @ _H, _H @ _S @ _H),
        (dec.after[0] @ _H, dec.after[1] @ _H),
    ]
    angles = [wrap_angle(-2 * z), wrap_angle(-2 * y), wrap_angle(-2 * x)]
    out: list[tuple[Gate, ...]] = []
    for k, (u1, u2) in enumerate(locals_):
        out += _euler_layers(s, u1, u2)
        if k < 3:
            out.append((RZZ(s, angles[k]),))
    return tuple(out)


def native_circuit(c: Circuit) -> Circuit:
    """Replace every ``DENSE2Q`` gate; other gates of such a layer go first."""
    layers: list[tuple[Gate, ...]] = []
    for layer in c.layers:
        dense = [g for g in layer if g.kind == "DENSE2Q"]
        if not dense:
            layers.append(layer)
            continue
        rest = tuple(g for g in layer if g.kind != "DENSE2Q")
        if rest:
            layers.append(rest)
        parts = [decompose_to_native(g) for g in dense]
        for k in range(N_TEMPLATE_LAYERS):
            layers.append(tuple(gg for p in parts for gg in p[k]))
    return Circuit(c.L, tuple(layers))


def reference_circuit(c: Circuit) -> Circuit:
    """Same layers with every RX/RZ angle set to zero; RZZ gates kept."""
    layers = []
    for layer in c.layers:
        new = []
        for g in layer:
            if g.kind == "DENSE2Q":
                raise ValueError("circuit contains DENSE2Q gates; run native_circuit "
                                 "(decompose_to_native) first")
            new.append(g if g.kind == "RZZ" else Gate(g.kind, g.sites, 0.0))
        layers.append(tuple(new))
    return Circuit(c.L, tuple(layers))


# --------------------------------------------------------------------------
# density-matrix simulation
# --------------------------------------------------------------------------

def density_from_state(psi: np.ndarray) -> np.ndarray:
    """``vec(|psi><psi|)`` as a ``(4**L, 1)`` batch; row index major."""
    return kernels.as_batch(np.kron(psi, psi.conj()))


def _replace_2q(rho: np.ndarray, p: float, q: int, L: int) -> None:
    full = rho.copy()
    kernels.depolarize_1q(full, 1.0, q, L)
    kernels.depolarize_1q(full, 1.0, q + 1, L)
    rho *= 1.0 - p
    rho += p * full


def _global_depolarize(rho: np.ndarray, lam: float, L: int) -> None:
    d = 1 << L
    m = rho.reshape(d, d)
    tr = np.trace(m)
    m *= 1.0 - lam
    m[np.diag_indices(d)] += lam * tr / d


def apply_noisy_circuit_dm(rho: np.ndarray, c: Circuit, noise: NoiseModel) -> None:
    """Evolve ``vec(rho)`` in place: gate, then its depolarizing channel."""
    L = c.L
    n = 2 * L
    for layer in c.layers:
        for g in layer:
            apply_gate_batch(rho, g, n)
            apply_gate_batch(rho, g, n, offset=L, conj=True)
            q = g.sites[0] - 1
            if len(g.sites) == 1:
                if noise.p1 > 0:
                    kernels.depolarize_1q(rho, noise.p1, q, L)
            elif noise.p2 > 0:
                _replace_2q(rho, noise.p2, q, L)
    if noise.global_depol > 0:
        _global_depolarize(rho, noise.global_depol, L)


def dm_expectation_z(rho: np.ndarray, site: int, L: int) -> float:
    d = 1 << L
    diag = rho.reshape(d, d).diagonal().real
    return float(np.dot(diag, z_table(L)[:, site - 1]))


# --------------------------------------------------------------------------
# Pauli trajectories
# --------------------------------------------------------------------------

def _pauli_on_columns(psi: np.ndarray, q: int, paulis: np.ndarray, cols: np.ndarray) -> None:
    """Apply X/Y/Z (codes 1/2/3) on qubit ``q`` to the chosen columns; code 0 is identity."""
    ncol = psi.shape[1]
    v = psi.reshape(1 << q, 2, -1, ncol)
    zc = cols[(paulis == 2) | (paulis == 3)]
    if len(zc):
        v[:, 1, :, zc] *= -1.0
    xc = cols[(paulis == 1) | (paulis == 2)]
    if len(xc):
        v[:, :, :, xc] = v[:, ::-1, :, xc]


def _trajectory_errors(psi: np.ndarray, qubits: Sequence[int], p: float, rng) -> None:
    ncol = psi.shape[1]
    hit = np.flatnonzero(rng.random(ncol) < p)
    if not len(hit):
        return
    for q in qubits:
        paulis = rng.integers(0, 4, size=len(hit))
        _pauli_on_columns(psi, q, paulis, hit)


def apply_noisy_circuit_traj(psi: np.ndarray, c: Circuit, noise: NoiseModel, rng) -> None:
    """One column per trajectory; errors are sampled independently per column."""
    L = c.L
    for layer in c.layers:
        for g in layer:
            apply_gate_batch(psi, g, L)
            q = g.sites[0] - 1
            if len(g.sites) == 1:
                if noise.p1 > 0:
                    _trajectory_errors(psi, (q,), noise.p1, rng)
            elif noise.p2 > 0:
                _trajectory_errors(psi, (q, q + 1), noise.p2, rng)
    if noise.global_depol > 0:
        _trajectory_errors(psi, range(L), noise.global_depol, rng)


def traj_expectation_z(psi: np.ndarray, site: int) -> float:
    ncol = psi.shape[1]
    probs = np.abs(psi.reshape(1 << (site - 1), 2, -1, ncol)) ** 2
    per = probs[:, 0].sum(axis=(0, 1)) - probs[:, 1].sum(axis=(0, 1))
    # np.sum over a contiguous 1-D array is pairwise
    return float(np.sum(np.ascontiguousarray(per)) / ncol)


# --------------------------------------------------------------------------
# series
# --------------------------------------------------------------------------

def _readout(ez: float, flip: float) -> float:
    return (1.0 - 2.0 * flip) * ez


def run_noisy_series(circuits: Circuit | Callable[[int], Circuit], pattern, dt: float, t_max: float,
                     noise: NoiseModel, shots: int | None = None, seed: int = 0,
                     method: str = "auto", trajectories: int = 256,
                     label: str = "noisy", stream: int = 0) -> TimeSeries:
    """Noisy central-site magnetization for ``k = 0..t_max/dt``.

    ``circuits`` is either one step, repeated ``k`` times for point ``k`` (the
    state is carried forward, which is exact for Markovian noise), or a
    callable returning the whole circuit for point ``k``.  ``method`` is
    ``'density'`` (``L <= 10``), ``'trajectories'`` or ``'auto'``.  Readout
    flips scale the expectation by ``1 - 2 f``; with ``shots`` the estimate is
    binomially sampled per point from ``(seed, k)``; a nonzero ``stream``
    gives an independent set of draws (used for reference circuits).
    """
    pattern = as_pattern(pattern)
    L = len(pattern)
    repeated = isinstance(circuits, Circuit)
    if repeated and circuits.L != L:
        raise ValueError("step width does not match the initial pattern")
    if method == "auto":
        method = "density" if L <= MAX_DENSITY_L else "trajectories"
    if method == "density" and L > MAX_DENSITY_L:
        raise ValueError(f"density-matrix mode limited to L <= {MAX_DENSITY_L}, got {L}")
    if method not in ("density", "trajectories"):
        raise ValueError(f"unknown method {method!r}")
    k_max = n_steps(dt, t_max)
    site = central_site(L)
    psi0 = kink_state(pattern, L)
    values = np.empty(k_max + 1)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7A, int(stream)]))

    def fresh():
        if method == "density":
            return density_from_state(psi0)
        return np.repeat(kernels.as_batch(psi0), trajectories, axis=1)

    def evolve(state, c):
        if method == "density":
            apply_noisy_circuit_dm(state, c, noise)
        else:
            apply_noisy_circuit_traj(state, c, noise, rng)

    def measure(state):
        if method == "density":
            return dm_expectation_z(state, site, L)
        return traj_expectation_z(state, site)

    state = fresh()
    for k in range(k_max + 1):
        if repeated:
            if k:
                evolve(state, circuits)
        else:
            state = fresh()
            evolve(state, circuits(k))
        ez = _readout(measure(state), noise.readout_flip)
        if shots is not None:
            ss = point_seed(seed, k) if not stream else np.random.SeedSequence([int(seed), k, int(stream)])
            ez = sample_expectation_z(ez, None, shots, ss)
        values[k] = ez
    meta = {"backend": label, "L": L, "initial": str(pattern), "site": site, "shots": shots,
            "seed": seed, "stream": stream, "method": method,
            "noise": {"p1": noise.p1, "p2": noise.p2, "readout_flip": noise.readout_flip,
                      "global_depol": noise.global_depol}}
    if method == "trajectories":
        meta["trajectories"] = trajectories
    return TimeSeries(dt=dt, values=values, meta=meta)


# --------------------------------------------------------------------------
# mitigation
# --------------------------------------------------------------------------

@dataclass
class MitigationPair:
    raw: TimeSeries
    reference: TimeSeries
    mitigated: TimeSeries

    def __post_init__(self):
        n = len(self.raw)
        if len(self.reference) != n or len(self.mitigated) != n:
            raise ValueError("raw, reference and mitigated series differ in length")
        if not np.isclose(self.raw.dt, self.reference.dt, rtol=1e-12, atol=0):
            raise ValueError("raw and reference series differ in dt")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "raw", "ref", "mitigated", "valid"])
            for t, r, f, m, v in zip(self.raw.times, self.raw.values, self.reference.values,
                                     self.mitigated.values, self.mitigated.valid):
                w.writerow([repr(float(t)), repr(float(r)), repr(float(f)), repr(float(m)), int(v)])


def mitigate(raw: TimeSeries, reference: TimeSeries, eps_den: float = EPS_DEN) -> TimeSeries:
    """``raw[k] * reference[0] / reference[k]`` where ``|reference[k]| >= eps_den``.

    Points below the threshold, or invalid in either input, are flagged
    invalid and carry NaN.
    """
    if len(raw) != len(reference):
        raise ValueError("raw and reference series differ in length")
    if not np.isclose(raw.dt, reference.dt, rtol=1e-12, atol=0):
        raise ValueError("raw and reference series differ in dt")
    ref = reference.values
    ok = (np.abs(ref) >= eps_den) & raw.valid & reference.valid
    if not ok[0]:
        raise ValueError("reference[0] is below eps_den; nothing to normalise by")
    out = np.full(len(raw), np.nan)
    out[ok] = raw.values[ok] * (ref[0] / ref[ok])
    if not ok.any():  # pragma: no cover - ok[0] already checked
        raise ValueError("every mitigated point is invalid")
    meta = dict(raw.meta, backend=f"{raw.meta.get('backend', 'raw')}+mitigated", eps_den=eps_den,
                n_invalid=int((~ok).sum()))
    return TimeSeries(dt=raw.dt, values=out, meta=meta, valid=ok)


# --------------------------------------------------------------------------
# job plans
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanEntry:
    kind: str  # "U" or "REF"
    k: int
    item: object = field(default=None, compare=False, repr=False)


@dataclass
class JobPlan:
    entries: list[PlanEntry]
    chunk_size: int

    @property
    def chunks(self) -> list[list[PlanEntry]]:
        c = self.chunk_size
        return [self.entries[i:i + c] for i in range(0, len(self.entries), c)]

    @property
    def boundaries(self) -> list[int]:
        """Time index ``k`` of the first entry of every chunk after the first."""
        return [ch[0].k for ch in self.chunks[1:]]

    def to_manifest(self) -> str:
        lines = [f"# interleaved plan: {len(self.entries)} circuits, chunk size {self.chunk_size}"]
        for j, ch in enumerate(self.chunks):
            lines.append(f"=== chunk {j} ({len(ch)} circuits)")
            lines.extend(f"{e.kind} {e.k}" for e in ch)
        return "\n".join(lines) + "\n"


def interleaved_plan(circuits: Sequence, references: Sequence | None = None,
                     chunk_size: int = 200) -> JobPlan:
    """Order ``U(t0), REF(t0), U(t1), REF(t1), ...`` and split into jobs."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    if references is None:
        references = [reference_circuit(c) if isinstance(c, Circuit) else None for c in circuits]
    if len(references) != len(circuits):
        raise ValueError("need one reference per circuit")
    entries = []
    for k, (c, r) in enumerate(zip(circuits, references)):
        entries.append(PlanEntry("U", k, c))
        entries.append(PlanEntry("REF", k, r))
    return JobPlan(entries, chunk_size)


__all__ = [
    "EPS_DEN", "MAX_DENSITY_L", "N_TEMPLATE_LAYERS", "JobPlan", "KAKDecomposition", "MitigationPair",
    "NoiseModel", "PlanEntry", "apply_noisy_circuit_dm", "apply_noisy_circuit_traj",
    "circuit_to_matrix", "decompose_to_native", "density_from_state", "dm_expectation_z",
    "euler_zxz", "interleaved_plan", "kak", "mitigate", "native_circuit", "phase_distance",
    "reference_circuit", "run_noisy_series", "wrap_angle",
]
