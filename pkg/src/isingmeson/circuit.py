"""Gate-level circuits, a statevector simulator and Trotter circuit builders.

Rotation conventions::

    RX(a)  = exp(-i a X / 2)
    RZ(a)  = exp(-i a Z / 2)
    RZZ(a) = exp(-i a Z(x)Z / 2)

so a factor ``exp(+i c dt Z)`` from the Trotter product maps to ``RZ(-2 c dt)``.
The simulator does not enforce the hardware window ``0 < a <= pi/2`` for RZZ.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .model import ModelSpec, as_pattern, central_site, kink_state
from .series import TimeSeries, n_steps

KINDS = ("RX", "RZ", "RZZ", "DENSE2Q")
MAX_MATRIX_L = 12

_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def rx(a: float) -> np.ndarray:
    c, s = np.cos(a / 2), np.sin(a / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def rz(a: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def rzz(a: float) -> np.ndarray:
    m, p = np.exp(-0.5j * a), np.exp(0.5j * a)
    return np.diag([m, p, p, m])


@dataclass(frozen=True)
class Gate:
    kind: str
    sites: tuple[int, ...]
    angle: float = 0.0
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        sites = tuple(int(s) for s in self.sites)
        object.__setattr__(self, "sites", sites)
        two = self.kind in ("RZZ", "DENSE2Q")
        if len(sites) != (2 if two else 1):
            raise ValueError(f"{self.kind} acts on {'2' if two else '1'} site(s), got {sites}")
        if two and sites[1] != sites[0] + 1:
            raise ValueError(f"two-qubit gates need adjacent sites (i, i+1), got {sites}")
        if self.kind == "DENSE2Q":
            m = np.asarray(self.matrix, dtype=np.complex128)
            if m.shape != (4, 4):
                raise ValueError("DENSE2Q needs a 4x4 matrix")
            if np.max(np.abs(m.conj().T @ m - np.eye(4))) > 1e-10:
                raise ValueError("DENSE2Q matrix is not unitary")
            object.__setattr__(self, "matrix", m)
        else:
            object.__setattr__(self, "angle", float(self.angle))

    def unitary(self) -> np.ndarray:
        if self.kind == "RX":
            return rx(self.angle)
        if self.kind == "RZ":
            return rz(self.angle)
        if self.kind == "RZZ":
            return rzz(self.angle)
        return self.matrix


def RX(site, angle):
    return Gate("RX", (site,), angle)


def RZ(site, angle):
    return Gate("RZ", (site,), angle)


def RZZ(site, angle):
    return Gate("RZZ", (site, site + 1), angle)


def DENSE2Q(site, matrix):
    return Gate("DENSE2Q", (site, site + 1), matrix=matrix)


@dataclass(frozen=True)
class Circuit:
    """Ordered layers; gates inside one layer act on disjoint sites."""

    L: int
    layers: tuple[tuple[Gate, ...], ...] = ()

    def __post_init__(self):
        layers = tuple(tuple(layer) for layer in self.layers)
        for k, layer in enumerate(layers):
            seen: set[int] = set()
            for g in layer:
                for s in g.sites:
                    if not 1 <= s <= self.L:
                        raise ValueError(f"layer {k}: site {s} outside [1, {self.L}]")
                    if s in seen:
                        raise ValueError(f"layer {k}: site {s} used by two gates")
                    seen.add(s)
        object.__setattr__(self, "layers", layers)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.L != self.L:
            raise ValueError("width mismatch")
        return Circuit(self.L, self.layers + other.layers)

    def repeat(self, k: int) -> "Circuit":
        return Circuit(self.L, self.layers * k)

    @property
    def gates(self) -> Iterable[Gate]:
        for layer in self.layers:
            yield from layer

    @property
    def depth(self) -> int:
        return len(self.layers)

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)


# --------------------------------------------------------------------------
# simulation
# --------------------------------------------------------------------------

def apply_gate_batch(psi: np.ndarray, g: Gate, n: int, offset: int = 0, conj: bool = False) -> None:
    """Apply ``g`` in place to a ``(2**n, ncol)`` batch.

    ``offset`` shifts the gate's qubits (used for the column half of a
    vectorized density matrix); ``conj`` applies the complex conjugate.
    """
    q = g.sites[0] - 1 + offset
    if g.kind == "RZ":
        d = np.array([np.exp(-0.5j * g.angle), np.exp(0.5j * g.angle)])
        kernels.apply_diag_1q(psi, d.conj() if conj else d, q, n)
    elif g.kind == "RZZ":
        m, p = np.exp(-0.5j * g.angle), np.exp(0.5j * g.angle)
        d = np.array([m, p, p, m])
        kernels.apply_diag_2q(psi, d.conj() if conj else d, q, n)
    elif g.kind == "RX":
        u = rx(g.angle)
        kernels.apply_1q(psi, u.conj() if conj else u, q, n)
    else:
        u = g.matrix
        kernels.apply_2q(psi, np.ascontiguousarray(u.conj() if conj else u), q, n)


def apply_layers_batch(psi: np.ndarray, layers: Sequence[Sequence[Gate]], n: int) -> None:
    for layer in layers:
        for g in layer:
            apply_gate_batch(psi, g, n)


def apply_circuit(psi: np.ndarray, c: Circuit) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.shape != (1 << c.L,):
        raise ValueError(f"state of shape {psi.shape} does not match width {c.L}")
    out = kernels.as_batch(psi)
    apply_layers_batch(out, c.layers, c.L)
    return out[:, 0]


def circuit_to_matrix(c: Circuit) -> np.ndarray:
    if c.L > MAX_MATRIX_L:
        raise ValueError(f"dense circuit matrix limited to L <= {MAX_MATRIX_L}")
    U = np.eye(1 << c.L, dtype=np.complex128)
    apply_layers_batch(U, c.layers, c.L)
    return U


def expectation_z(psi: np.ndarray, site: int) -> float:
    psi = np.asarray(psi)
    L = int(np.log2(psi.shape[0]))
    if not 1 <= site <= L:
        raise ValueError(f"site {site} outside [1, {L}]")
    probs = np.abs(psi.reshape(1 << (site - 1), 2, -1)) ** 2
    return float(probs[:, 0].sum() - probs[:, 1].sum())


def sample_expectation_z(psi_or_value, site: int | None = None, shots: int = 8192,
                         seed=0) -> float:
    """Shot estimate ``2 * ups / shots - 1`` of ``<sigma^z_site>``.

    Accepts a state plus ``site`` or a precomputed expectation value (pass
    ``site=None``).  ``seed`` may be an int or a ``numpy.random.SeedSequence``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    ez = float(psi_or_value) if site is None else expectation_z(psi_or_value, site)
    p_up = min(1.0, max(0.0, 0.5 * (1.0 + ez)))
    ups = np.random.default_rng(seed).binomial(shots, p_up)
    return 2.0 * ups / shots - 1.0


def point_seed(seed: int, k: int) -> np.random.SeedSequence:
    """Generator seed for time point ``k``; independent of evaluation order."""
    return np.random.SeedSequence([int(seed), int(k)])


# --------------------------------------------------------------------------
# Trotter builders
# --------------------------------------------------------------------------

def _bonds(L: int, parity: int) -> list[int]:
    """1-based left sites of bonds whose 1-based left index has ``parity`` (0 even)."""
    return [i for i in range(1, L) if i % 2 == parity]


def trotter_first_order(spec: ModelSpec, dt: float) -> Circuit:
    """One first-order step: even-bond ZZ, odd-bond ZZ, X field, Z field.

    Bond parity follows the 1-based left site.  The four layers realize
    ``exp(i hz dt Z) exp(i hx dt X) exp(i dt ZZ_odd) exp(i dt ZZ_even)``.
    """
    L = spec.L
    return Circuit(L, (
        tuple(RZZ(i, -2.0 * dt) for i in _bonds(L, 0)),
        tuple(RZZ(i, -2.0 * dt) for i in _bonds(L, 1)),
        tuple(RX(i, -2.0 * spec.h_x * dt) for i in range(1, L + 1)),
        tuple(RZ(i, -2.0 * spec.h_z * dt) for i in range(1, L + 1)),
    ))


def trotter_second_order(spec: ModelSpec, dt: float) -> Circuit:
    """Symmetric step: half Z, half X, full ZZ, half X, half Z."""
    L = spec.L
    half_z = tuple(RZ(i, -spec.h_z * dt) for i in range(1, L + 1))
    half_x = tuple(RX(i, -spec.h_x * dt) for i in range(1, L + 1))
    return Circuit(L, (
        half_z,
        half_x,
        tuple(RZZ(i, -2.0 * dt) for i in _bonds(L, 0)),
        tuple(RZZ(i, -2.0 * dt) for i in _bonds(L, 1)),
        half_x,
        half_z,
    ))


def run_trotter_series(spec: ModelSpec, pattern, dt: float, t_max: float,
                       shots: int | None = None, seed: int = 0, order: int = 1) -> TimeSeries:
    """Central-site magnetization after ``k`` Trotter steps, ``k = 0..t_max/dt``.

    Point ``k`` is the ``k``-fold repetition of one step applied to the kink
    state.  Consecutive points share their first ``k-1`` steps, so the
    prefix state is carried forward; the gate sequence and floating-point
    operations are identical to rebuilding each circuit from scratch.
    """
    pattern = as_pattern(pattern)
    k_max = n_steps(dt, t_max)
    step = trotter_first_order(spec, dt) if order == 1 else trotter_second_order(spec, dt)
    site = central_site(spec.L)
    psi = kernels.as_batch(kink_state(pattern, spec.L))
    values = np.empty(k_max + 1)
    for k in range(k_max + 1):
        if k:
            apply_layers_batch(psi, step.layers, spec.L)
        ez = expectation_z(psi[:, 0], site)
        values[k] = ez if shots is None else sample_expectation_z(ez, None, shots, point_seed(seed, k))
    meta = {"backend": "trotter", "order": order, "L": spec.L, "h_x": spec.h_x, "h_z": spec.h_z,
            "initial": str(pattern), "site": site, "shots": shots, "seed": seed}
    return TimeSeries(dt=dt, values=values, meta=meta)


# --------------------------------------------------------------------------
# text format
# --------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def dumps_circuit(c: Circuit) -> str:
    lines = [f"# L {c.L}"]
    for k, layer in enumerate(c.layers):
        if k:
            lines.append("---")
        for g in layer:
            qs = " ".join(f"q{s}" for s in g.sites)
            if g.kind == "DENSE2Q":
                ents = " ".join(f"{_fmt(z.real)}{'+' if z.imag >= 0 else '-'}{_fmt(abs(z.imag))}j"
                                for z in g.matrix.ravel())
                lines.append(f"DENSE2Q {qs} {ents}")
            else:
                lines.append(f"{g.kind} {qs} {_fmt(g.angle)}")
    return "\n".join(lines) + "\n"


def loads_circuit(text: str, L: int | None = None) -> Circuit:
    layers: list[list[Gate]] = [[]]
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "L" and L is None:
                L = int(parts[1])
            continue
        if line == "---":
            layers.append([])
            continue
        tok = line.split()
        kind = tok[0]
        qs = [int(t[1:]) for t in tok[1:] if t.startswith("q")]
        rest = tok[1 + len(qs):]
        if kind == "DENSE2Q":
            m = np.array([complex(t) for t in rest], dtype=np.complex128).reshape(4, 4)
            layers[-1].append(Gate(kind, tuple(qs), matrix=m))
        else:
            layers[-1].append(Gate(kind, tuple(qs), float(rest[0])))
    if L is None:
        L = max((s for layer in layers for g in layer for s in g.sites), default=1)
    if len(layers) == 1 and not layers[0]:
        layers = []
    return Circuit(L, layers)
