"""Fixed-depth brickwall compression of ``exp(-iHt)`` by Riemannian descent.

The cost is ``1 - Re Tr(U_target^dagger W) / d``.  For a gate ``G`` the hole
contraction ``E`` satisfies ``Tr(U^dagger W) = Tr(E^dagger G)``, so the
Euclidean gradient (real inner product ``Re Tr(A^dagger B)``) is ``-E / d``
and the Riemannian gradient is ``G skew(G^dagger (-E / d))``.  Updates use the
polar retraction and an Armijo backtracking line search over all gates at
once.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .circuit import Circuit, DENSE2Q, apply_circuit, expectation_z, point_seed, sample_expectation_z
from .exact import diagonalize
from .model import ModelSpec, as_pattern, build_hamiltonian, central_site, kink_state
from .series import TimeSeries, n_steps

log = logging.getLogger(__name__)

MAX_DENSE_L = 12

_I2 = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Z = np.diag([1.0, -1.0]).astype(np.complex128)
_ZZ = np.kron(_Z, _Z)


# --------------------------------------------------------------------------
# ansatz and schedule
# --------------------------------------------------------------------------

@dataclass
class BrickwallAnsatz:
    """Layer ``l`` holds gates on bonds ``(i, i+1)`` (0-based ``i``) with ``i % 2 == l % 2``."""

    L: int
    gates: list[list[np.ndarray]]

    @property
    def n_layers(self) -> int:
        return len(self.gates)

    @staticmethod
    def bonds(L: int, layer: int) -> list[int]:
        return list(range(layer % 2, L - 1, 2))

    def copy(self) -> "BrickwallAnsatz":
        return BrickwallAnsatz(self.L, [[g.copy() for g in layer] for layer in self.gates])

    def to_circuit(self) -> Circuit:
        return Circuit(self.L, tuple(
            tuple(DENSE2Q(i + 1, g) for i, g in zip(self.bonds(self.L, l), layer))
            for l, layer in enumerate(self.gates)))

    @classmethod
    def identity(cls, L: int, n_layers: int) -> "BrickwallAnsatz":
        return cls(L, [[np.eye(4, dtype=np.complex128) for _ in cls.bonds(L, l)]
                       for l in range(n_layers)])

    def max_unitarity_error(self) -> float:
        return max((np.max(np.abs(g.conj().T @ g - np.eye(4))) for layer in self.gates for g in layer),
                   default=0.0)


@dataclass(frozen=True)
class LayerSchedule:
    """``n_layers`` for time ``t`` is the first breakpoint with ``t <= threshold``."""

    breakpoints: tuple[tuple[float, int], ...]

    def __post_init__(self):
        bps = tuple((float(t), int(n)) for t, n in self.breakpoints)
        if not bps:
            raise ValueError("schedule needs at least one breakpoint")
        ts = [t for t, _ in bps]
        ns = [n for _, n in bps]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("schedule thresholds must be strictly increasing")
        if any(b < a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
            raise ValueError("schedule layer counts must be positive and non-decreasing")
        object.__setattr__(self, "breakpoints", bps)

    def layers_at(self, t: float) -> int:
        for thr, n in self.breakpoints:
            if t <= thr + 1e-12:
                return n
        raise ValueError(f"schedule does not cover t={t}")

    def covers(self, t_max: float) -> bool:
        return t_max <= self.breakpoints[-1][0] + 1e-12


def default_schedule(t_max: float, base: int = 9, first: float = 3.0, every: float = 2.0,
                     increment: int = 8, cap: int = 41) -> LayerSchedule:
    """``base`` layers up to ``first``, then ``+increment`` per ``every`` time units, capped."""
    bps = [(first, base)]
    n, t = base, first
    while t < t_max and n < cap:
        t += every
        n = min(cap, n + increment)
        bps.append((t, n))
    if bps[-1][0] < t_max:
        bps[-1] = (float(t_max), bps[-1][1])
    return LayerSchedule(tuple(bps))


# --------------------------------------------------------------------------
# targets and initializers
# --------------------------------------------------------------------------

def bond_hamiltonians(spec: ModelSpec) -> list[np.ndarray]:
    """4x4 bond terms summing to ``H``; site fields are shared between the bonds touching a site."""
    L = spec.L
    w = np.array([1.0 if i in (0, L - 1) else 0.5 for i in range(L)])
    hs = []
    for i in range(L - 1):
        f_left = spec.h_x * _X + spec.h_z * _Z
        h = -_ZZ - w[i] * np.kron(f_left, _I2) - w[i + 1] * np.kron(_I2, f_left)
        hs.append(h)
    return hs


def _expm_herm(h: np.ndarray, t: float) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def trotter_brickwall(spec: ModelSpec, t: float, n_layers: int) -> BrickwallAnsatz:
    """Second-order Trotter circuit for ``exp(-iHt)`` merged into a brickwall.

    With ``n = (n_layers - 1) // 2`` steps of size ``tau = t / n`` the layers
    are E(tau/2) O(tau) E(tau) ... O(tau) E(tau/2); leftover layers are identity.
    """
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    hs = bond_hamiltonians(spec)
    n = max(1, (n_layers - 1) // 2)
    tau = t / n
    taus = [tau / 2] + [tau] * (2 * n - 1) + [tau / 2] if n_layers >= 3 else [t] * 1
    gates = []
    for l in range(n_layers):
        tl = taus[l] if l < len(taus) else 0.0
        gates.append([_expm_herm(hs[i], tl) for i in BrickwallAnsatz.bonds(spec.L, l)])
    return BrickwallAnsatz(spec.L, gates)


def extend_by_step(W: BrickwallAnsatz, spec: ModelSpec, dt: float) -> BrickwallAnsatz:
    """Warm start for ``t + dt``: fold one bond-split step into the last two layers."""
    hs = bond_hamiltonians(spec)
    out = W.copy()
    for l in range(max(0, W.n_layers - 2), W.n_layers):
        for j, i in enumerate(BrickwallAnsatz.bonds(W.L, l)):
            out.gates[l][j] = _expm_herm(hs[i], dt) @ out.gates[l][j]
    return out


def pad_layers(W: BrickwallAnsatz, n_layers: int) -> BrickwallAnsatz:
    if n_layers < W.n_layers:
        raise ValueError("cannot shrink an ansatz")
    out = W.copy()
    for l in range(W.n_layers, n_layers):
        out.gates.append([np.eye(4, dtype=np.complex128) for _ in BrickwallAnsatz.bonds(W.L, l)])
    return out


def target_operator(spec: ModelSpec, t: float, mode: str = "dense", tol: float = 1e-10,
                    max_bond: int = 64, steps_per_unit: int = 100):
    """``exp(-iHt)`` as a dense matrix or as an :class:`~isingmeson.mpo.MPOperator`."""
    if mode == "dense":
        if spec.L > MAX_DENSE_L:
            raise ValueError(f"dense target limited to L <= {MAX_DENSE_L}")
        eig = diagonalize(build_hamiltonian(spec))
        V = eig.eigenvectors
        return (V * np.exp(-1j * eig.eigenvalues * t)) @ V.conj().T
    if mode == "mpo":
        from .mpo import evolution_mpo

        return evolution_mpo(spec, t, tol=tol, max_bond=max_bond, steps_per_unit=steps_per_unit)
    raise ValueError(f"unknown mode {mode!r}")


def _as_dense_target(target) -> np.ndarray:
    if isinstance(target, np.ndarray):
        return target
    return target.to_dense()


# --------------------------------------------------------------------------
# dense contractions
# --------------------------------------------------------------------------

def _left_apply(X: np.ndarray, L: int, layer_idx: int, gates, dagger: bool = False) -> None:
    for i, g in zip(BrickwallAnsatz.bonds(L, layer_idx), gates):
        kernels.apply_2q(X, np.ascontiguousarray(g.conj().T if dagger else g), i, L)


def _right_apply(X: np.ndarray, L: int, layer_idx: int, gates, dagger: bool = False) -> np.ndarray:
    """Return ``X @ layer`` (or ``X @ layer^dagger``)."""
    Y = np.ascontiguousarray(X.T)
    for i, g in zip(BrickwallAnsatz.bonds(L, layer_idx), gates):
        m = g.conj() if dagger else g.T
        kernels.apply_2q(Y, np.ascontiguousarray(m), i, L)
    return np.ascontiguousarray(Y.T)


def ansatz_matrix(W: BrickwallAnsatz) -> np.ndarray:
    if W.L > MAX_DENSE_L:
        raise ValueError(f"dense ansatz limited to L <= {MAX_DENSE_L}")
    X = np.eye(1 << W.L, dtype=np.complex128)
    for l, layer in enumerate(W.gates):
        _left_apply(X, W.L, l, layer)
    return X


def _check_width(target, W: BrickwallAnsatz) -> None:
    L = target.L if not isinstance(target, np.ndarray) else int(round(math.log2(target.shape[0])))
    if L != W.L:
        raise ValueError(f"target width {L} does not match ansatz width {W.L}")


def overlap(target, W: BrickwallAnsatz) -> complex:
    """``Tr(U_target^dagger W)``."""
    _check_width(target, W)
    if isinstance(target, np.ndarray):
        return complex(np.vdot(target, ansatz_matrix(W)))
    from .mpo import mpo_overlap

    return mpo_overlap(target, W)


def cost(target, W: BrickwallAnsatz) -> float:
    d = float(1 << W.L)
    return 1.0 - overlap(target, W).real / d


def _partial_env(M: np.ndarray, L: int, i: int) -> np.ndarray:
    """``X[b, a] = sum_{p,s} M[(p,b,s), (p,a,s)]`` for the pair at 0-based site ``i``."""
    pre, post = 1 << i, 1 << (L - i - 2)
    T = M.reshape(pre, 4, post, pre, 4, post)
    return np.einsum("pbspas->ba", T)


def _environments_dense(U: np.ndarray, W: BrickwallAnsatz):
    """All hole environments and the overlap, by one sweep over the layers.

    ``N_k = (L_{k-1}...L_1) U^dagger (L_n...L_{k+1})`` obeys
    ``N_{k+1} = L_k N_k L_{k+1}^dagger`` and ``Tr(U^dagger W) = Tr(N_k L_k)``.
    """
    L, n = W.L, W.n_layers
    X = np.ascontiguousarray(U, dtype=np.complex128).copy()
    for l in range(n - 1, 0, -1):
        _left_apply(X, L, l, W.gates[l], dagger=True)
    N = np.ascontiguousarray(X.conj().T)
    envs: list[list[np.ndarray]] = []
    tr = 0.0j
    for k in range(n):
        M = _right_apply(N, L, k, W.gates[k])
        tr = np.trace(M)
        layer_envs = []
        for i, g in zip(BrickwallAnsatz.bonds(L, k), W.gates[k]):
            Mg = M.T.copy()
            kernels.apply_2q(Mg, np.ascontiguousarray(g.conj()), i, L)  # M @ G^dagger on this pair
            layer_envs.append(_partial_env(np.ascontiguousarray(Mg.T), L, i).conj().T)
        envs.append(layer_envs)
        if k + 1 < n:
            _left_apply(N, L, k, W.gates[k])
            N = _right_apply(N, L, k + 1, W.gates[k + 1], dagger=True)
    return envs, complex(tr)


def environments(target, W: BrickwallAnsatz):
    """Per-gate environments ``E`` with ``Tr(U^dagger W) = Tr(E^dagger G)``, plus that trace."""
    _check_width(target, W)
    if isinstance(target, np.ndarray):
        return _environments_dense(target, W)
    from .mpo import mpo_environments

    return mpo_environments(target, W)


def gate_environment(target, W: BrickwallAnsatz, layer: int, gate: int) -> np.ndarray:
    if not 0 <= layer < W.n_layers or not 0 <= gate < len(W.gates[layer]):
        raise IndexError(f"no gate {gate} in layer {layer}")
    envs, _ = environments(target, W)
    return envs[layer][gate]


# --------------------------------------------------------------------------
# manifold operations
# --------------------------------------------------------------------------

def skew(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A - A.conj().T)


def riemannian_gradient(G: np.ndarray, E: np.ndarray, d: float) -> np.ndarray:
    """Project the Euclidean gradient ``-E/d`` onto the tangent space at ``G``."""
    if np.max(np.abs(G.conj().T @ G - np.eye(G.shape[0]))) > 1e-8:
        raise ValueError("G is not unitary")
    D = -E / d
    return G @ skew(G.conj().T @ D)


def retract(G: np.ndarray, xi: np.ndarray, step: float) -> np.ndarray:
    """Polar retraction: unitary factor of ``G + step * xi``."""
    if step == 0.0:
        return G.copy()
    A = G.conj().T @ xi
    if np.max(np.abs(A + A.conj().T)) > 1e-8 * max(1.0, np.max(np.abs(A))):
        raise ValueError("xi is not tangent at G")
    u, _, vh = np.linalg.svd(G + step * xi)
    return u @ vh


def inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b).real)


# --------------------------------------------------------------------------
# optimizer
# --------------------------------------------------------------------------

@dataclass
class OptimizeOptions:
    max_iters: int = 500
    grad_tol: float = 1e-8
    cost_tol: float = 0.0
    armijo_c: float = 1e-4
    shrink: float = 0.5
    grow: float = 2.0
    init_step: float = 1.0
    max_step: float = 1e4
    max_backtracks: int = 40
    seed: int = 0


@dataclass
class OptimizeResult:
    ansatz: BrickwallAnsatz
    trace: list[tuple[int, float, float, float]] = field(default_factory=list)
    status: str = "max_iters"
    max_unitarity_error: float = 0.0

    @property
    def cost(self) -> float:
        return self.trace[-1][1]

    @property
    def costs(self) -> np.ndarray:
        return np.array([row[1] for row in self.trace])

    def trace_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "cost", "grad_norm", "step"])
            for it, c, g, s in self.trace:
                w.writerow([it, repr(c), repr(g), repr(s)])


def _all_gradients(target, W: BrickwallAnsatz):
    d = float(1 << W.L)
    envs, tr = environments(target, W)
    grads = [[riemannian_gradient(G, E, d) for G, E in zip(layer, le)]
             for layer, le in zip(W.gates, envs)]
    return grads, 1.0 - tr.real / d


def optimize(target, init: BrickwallAnsatz, opts: OptimizeOptions | None = None,
             callback=None) -> OptimizeResult:
    """Riemannian gradient descent with Armijo backtracking.

    Every iteration updates all gates from one set of environments.  The
    returned trace is non-increasing in cost.  Deterministic: there is no
    randomness in the updates (``seed`` is recorded for provenance only).
    """
    opts = opts or OptimizeOptions()
    _check_width(target, init)
    W = init.copy()
    res = OptimizeResult(ansatz=W)
    step = opts.init_step
    worst = W.max_unitarity_error()
    last_step = 0.0
    for it in range(opts.max_iters + 1):
        grads, c = _all_gradients(target, W)
        gnorm2 = sum(inner(g, g) for layer in grads for g in layer)
        gnorm = math.sqrt(gnorm2)
        res.trace.append((it, c, gnorm, last_step))
        if callback is not None:
            callback(it, c, gnorm, W)
        if gnorm <= opts.grad_tol or c <= opts.cost_tol:
            res.status = "converged"
            break
        if it == opts.max_iters:
            break
        step = min(step * opts.grow, opts.max_step)
        for _ in range(opts.max_backtracks):
            trial = BrickwallAnsatz(W.L, [[retract(G, -g, step) for G, g in zip(layer, gl)]
                                          for layer, gl in zip(W.gates, grads)])
            c_new = cost(target, trial)
            if c_new <= c - opts.armijo_c * step * gnorm2:
                break
            step *= opts.shrink
        else:
            res.status = "line_search_failed"
            log.warning("line search failed at iteration %d (cost %.3e)", it, c)
            break
        W = trial
        last_step = step
        worst = max(worst, W.max_unitarity_error())
    res.ansatz = W
    res.max_unitarity_error = worst
    return res


# --------------------------------------------------------------------------
# time series
# --------------------------------------------------------------------------

def run_compressed_series(spec: ModelSpec, pattern, schedule: LayerSchedule | None, dt: float,
                          t_max: float, shots: int | None = None, seed: int = 0,
                          opts: OptimizeOptions | None = None, mode: str = "dense",
                          keep_circuits: bool = False) -> TimeSeries:
    """Re-optimize one brickwall per time point and record ``<sigma^z_cen>``.

    The circuit for ``t_{i+1}`` starts from the optimized ``t_i`` circuit with
    one extra step folded in; when the schedule deepens, the better of that
    (padded with identity layers) and a fresh Trotter initializer is used.
    """
    pattern = as_pattern(pattern)
    schedule = schedule or default_schedule(t_max)
    if not schedule.covers(t_max):
        raise ValueError("schedule does not cover [0, t_max]")
    opts = opts or OptimizeOptions()
    k_max = n_steps(dt, t_max)
    site = central_site(spec.L)
    psi0 = kink_state(pattern, spec.L)
    values = np.empty(k_max + 1)
    costs = np.zeros(k_max + 1)
    layers = np.zeros(k_max + 1, dtype=int)
    statuses: list[str] = []
    circuits: list[Circuit] = []
    prev: BrickwallAnsatz | None = None
    for k in range(k_max + 1):
        t = k * dt
        n = schedule.layers_at(t)
        layers[k] = n
        if k == 0:
            W = BrickwallAnsatz.identity(spec.L, n)
            c = 0.0
            statuses.append("identity")
        else:
            target = target_operator(spec, t, mode=mode)
            cands = [trotter_brickwall(spec, t, n)]
            if prev is not None:
                cands.append(pad_layers(extend_by_step(prev, spec, dt), n))
            init = min(cands, key=lambda w: cost(target, w))
            res = optimize(target, init, opts)
            W, c = res.ansatz, res.cost
            statuses.append(res.status)
        prev = W
        costs[k] = c
        if keep_circuits:
            circuits.append(W.to_circuit())
        psi = apply_circuit(psi0, W.to_circuit())
        ez = expectation_z(psi, site)
        if k == 0:
            ez = float(pattern.z_values()[site - 1])
        values[k] = ez if shots is None else sample_expectation_z(ez, None, shots, point_seed(seed, k))
    meta = {"backend": "compressed", "L": spec.L, "h_x": spec.h_x, "h_z": spec.h_z,
            "initial": str(pattern), "site": site, "shots": shots, "seed": seed,
            "costs": costs.tolist(), "layers": layers.tolist(), "status": statuses,
            "warnings": [k for k, s in enumerate(statuses) if s == "line_search_failed"],
            "schedule": [list(bp) for bp in schedule.breakpoints]}
    if keep_circuits:
        meta["circuits"] = circuits
    return TimeSeries(dt=dt, values=values, meta=meta)
