"""Ising chain with transverse and longitudinal fields, kink states, E8 masses.

Conventions used throughout the package:

* sites are 1-based in every user-facing argument and 0-based internally;
* site 1 is the most significant bit of a basis index;
* ``'U'`` is bit 0 (sigma^z = +1), ``'D'`` is bit 1 (sigma^z = -1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DENSE_L = 14

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0

# tabulated ratios to m1, three decimals
E8_RATIOS = (
    ("m2-m1", 0.618),
    ("m1", 1.0),
    ("m2", 1.618),
    ("m1+m2", 2.618),
)


@dataclass(frozen=True)
class ModelSpec:
    """Open chain ``H = -(sum ZZ + h_x sum X + h_z sum Z)``."""

    L: int
    h_x: float = 1.0
    h_z: float = 3.0
    boundary: str = "open"

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise ValueError(f"L must be an integer >= 2, got {self.L!r}")
        if self.boundary != "open":
            raise ValueError("only open boundaries are supported")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "h_x", float(self.h_x))
        object.__setattr__(self, "h_z", float(self.h_z))


@dataclass(frozen=True)
class KinkPattern:
    spins: str

    def __post_init__(self):
        s = str(self.spins).strip().upper()
        if not s or set(s) - {"U", "D"}:
            raise ValueError(f"kink pattern must use only 'U' and 'D': {self.spins!r}")
        object.__setattr__(self, "spins", s)

    def __len__(self):
        return len(self.spins)

    def __str__(self):
        return self.spins

    @property
    def index(self) -> int:
        """Computational basis index of the product state."""
        return int(self.spins.replace("U", "0").replace("D", "1"), 2)

    def z_values(self) -> np.ndarray:
        return np.array([1.0 if c == "U" else -1.0 for c in self.spins])


def as_pattern(pattern) -> KinkPattern:
    return pattern if isinstance(pattern, KinkPattern) else KinkPattern(pattern)


@dataclass(frozen=True)
class E8Reference:
    m1: float
    entries: tuple[tuple[str, float], ...]

    def as_dict(self) -> dict[str, float]:
        return dict(self.entries)


def z_table(L: int) -> np.ndarray:
    """``(2**L, L)`` array of sigma^z eigenvalues, column ``i`` for site ``i+1``."""
    idx = np.arange(1 << L)
    bits = (idx[:, None] >> (L - 1 - np.arange(L))) & 1
    return (1 - 2 * bits).astype(np.float64)


def build_hamiltonian(spec: ModelSpec) -> np.ndarray:
    """Dense real Hamiltonian in the computational basis.

    The ZZ and longitudinal terms are diagonal; each transverse term flips one
    bit.  Raises for ``L > 14``.
    """
    L = spec.L
    if L > MAX_DENSE_L:
        raise ValueError(f"dense Hamiltonian limited to L <= {MAX_DENSE_L}, got {L}")
    dim = 1 << L
    z = z_table(L)
    diag = -(np.sum(z[:, :-1] * z[:, 1:], axis=1) + spec.h_z * z.sum(axis=1))
    H = np.zeros((dim, dim))
    H[np.arange(dim), np.arange(dim)] = diag
    idx = np.arange(dim)
    for i in range(L):
        H[idx, idx ^ (1 << (L - 1 - i))] -= spec.h_x
    return H


def kink_state(pattern, L: int | None = None) -> np.ndarray:
    pattern = as_pattern(pattern)
    if L is not None and len(pattern) != L:
        raise ValueError(f"pattern length {len(pattern)} does not match register width {L}")
    psi = np.zeros(1 << len(pattern), dtype=np.complex128)
    psi[pattern.index] = 1.0
    return psi


def central_site(L: int) -> int:
    """1-based central site; central-left for even chains."""
    if L < 2:
        raise ValueError("L must be >= 2")
    return (L + 1) // 2


def e8_reference(m1: float) -> E8Reference:
    if not m1 > 0:
        raise ValueError(f"m1 must be positive, got {m1!r}")
    entries = tuple(sorted(((lab, r * m1) for lab, r in E8_RATIOS), key=lambda e: e[1]))
    return E8Reference(m1=float(m1), entries=entries)
