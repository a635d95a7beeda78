import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from isingmeson.circuit import (
    RX, RZ, RZZ, DENSE2Q, Circuit, Gate, apply_circuit, circuit_to_matrix, dumps_circuit,
    expectation_z, loads_circuit, run_trotter_series, rx, rz, rzz, sample_expectation_z,
    trotter_first_order, trotter_second_order,
)
from isingmeson.exact import diagonalize, evolve_exact, run_exact_series
from isingmeson.model import ModelSpec, build_hamiltonian, kink_state

from conftest import haar_unitary, random_state

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2)


def embed(op, first, L, width=1):
    return np.kron(np.kron(np.eye(1 << (first - 1)), op), np.eye(1 << (L - first - width + 1)))


def random_circuit(L, depth, rng):
    layers = []
    for _ in range(depth):
        free = list(range(1, L + 1))
        layer = []
        while free:
            s = free.pop(rng.integers(len(free)))
            kind = rng.choice(["RX", "RZ", "RZZ", "DENSE2Q"])
            if kind in ("RZZ", "DENSE2Q"):
                if s + 1 not in free:
                    kind = "RX"
                else:
                    free.remove(s + 1)
            if kind == "DENSE2Q":
                layer.append(DENSE2Q(s, haar_unitary(4, rng)))
            else:
                layer.append(Gate(kind, (s, s + 1) if kind == "RZZ" else (s,), rng.uniform(-4, 4)))
        layers.append(layer)
    return Circuit(L, layers)


def dense_product(c):
    U = np.eye(1 << c.L, dtype=complex)
    for layer in c.layers:
        for g in layer:
            U = embed(g.unitary(), g.sites[0], c.L, len(g.sites)) @ U
    return U


@pytest.mark.parametrize("seed", range(10))
def test_gate_conventions(seed):
    a = np.random.default_rng(seed).uniform(-2 * np.pi, 2 * np.pi)
    np.testing.assert_allclose(rx(a), expm(-0.5j * a * X), atol=1e-14)
    np.testing.assert_allclose(rz(a), expm(-0.5j * a * Z), atol=1e-14)
    np.testing.assert_allclose(rzz(a), expm(-0.5j * a * np.kron(Z, Z)), atol=1e-14)


def test_empty_circuit(rng):
    psi = random_state(3, rng)
    np.testing.assert_array_equal(apply_circuit(psi, Circuit(3)), psi)
    np.testing.assert_array_equal(circuit_to_matrix(Circuit(3)), np.eye(8))


def test_rx_pi_flips_up():
    out = apply_circuit(kink_state("U"), Circuit(1, [[RX(1, np.pi)]]))
    np.testing.assert_allclose(out, [0, -1j], atol=1e-15)


def test_rz_on_one_qubit():
    th = 0.37
    U = circuit_to_matrix(Circuit(1, [[RZ(1, th)]]))
    np.testing.assert_allclose(U, np.diag([np.exp(-0.5j * th), np.exp(0.5j * th)]), atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_random_circuit_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(3, 6, rng)
    psi = random_state(3, rng)
    U = dense_product(c)
    assert np.max(np.abs(apply_circuit(psi, c) - U @ psi)) <= 1e-12
    assert np.max(np.abs(circuit_to_matrix(c) - U)) <= 1e-12


@given(st.integers(0, 2**31 - 1))
def test_norm_and_shuffle_invariance(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(5, 5, rng)
    psi = random_state(5, rng)
    out = apply_circuit(psi, c)
    assert abs(np.linalg.norm(out) - 1) <= 1e-12
    shuffled = Circuit(5, [list(layer)[::-1] for layer in c.layers])
    np.testing.assert_allclose(apply_circuit(psi, shuffled), out, atol=1e-12)


def test_site_collision_and_width():
    with pytest.raises(ValueError):
        Circuit(3, [[RX(1, 0.1), RZZ(1, 0.2)]])
    with pytest.raises(ValueError):
        Circuit(3, [[RX(4, 0.1)]])
    with pytest.raises(ValueError):
        Gate("RZZ", (1, 3), 0.1)
    with pytest.raises(ValueError):
        apply_circuit(np.ones(4) / 2, Circuit(3))
    with pytest.raises(ValueError):
        DENSE2Q(1, np.ones((4, 4)))


def test_circuit_to_matrix_guard():
    with pytest.raises(ValueError):
        circuit_to_matrix(Circuit(13))


def test_first_order_two_sites():
    hx, hz, dt = 1.0, 3.0, 0.1
    c = trotter_first_order(ModelSpec(2, hx, hz), dt)
    assert c.count("RZZ") == 1 and c.count("RX") == 2 and c.count("RZ") == 2
    Z1, Z2 = np.kron(Z, I2), np.kron(I2, Z)
    X1, X2 = np.kron(X, I2), np.kron(I2, X)
    ref = expm(1j * hz * dt * (Z1 + Z2)) @ expm(1j * hx * dt * (X1 + X2)) @ expm(1j * dt * Z1 @ Z2)
    assert np.max(np.abs(circuit_to_matrix(c) - ref)) <= 1e-12


def test_layer_order():
    c = trotter_first_order(ModelSpec(5, 1.0, 3.0), 0.1)
    kinds = [{g.kind for g in layer} for layer in c.layers]
    assert kinds == [{"RZZ"}, {"RZZ"}, {"RX"}, {"RZ"}]
    assert [g.sites[0] for g in c.layers[0]] == [2, 4]
    assert [g.sites[0] for g in c.layers[1]] == [1, 3]


@pytest.mark.parametrize("builder", [trotter_first_order, trotter_second_order])
def test_zero_step_is_identity(builder):
    U = circuit_to_matrix(builder(ModelSpec(4, 1.0, 3.0), 0.0))
    np.testing.assert_allclose(U, np.eye(16), atol=1e-15)


def test_first_order_column_by_column():
    c = trotter_first_order(ModelSpec(3, 1.0, 3.0), 0.1)
    U = circuit_to_matrix(c)
    for j in range(8):
        e = np.zeros(8, dtype=complex)
        e[j] = 1
        np.testing.assert_allclose(U[:, j], apply_circuit(e, c), atol=1e-15)


def _comm_norm(A, B):
    return np.linalg.norm(A @ B - B @ A, 2)


def test_first_order_one_step_bound():
    spec, dt = ModelSpec(8, 1.0, 3.0), 0.1
    H = build_hamiltonian(spec)
    L = spec.L
    zz_e = sum(embed(np.kron(Z, Z), i, L, 2) for i in range(2, L, 2))
    zz_o = sum(embed(np.kron(Z, Z), i, L, 2) for i in range(1, L, 2))
    fx = sum(embed(X, i, L) for i in range(1, L + 1))
    fz = sum(embed(Z, i, L) for i in range(1, L + 1))
    parts = [-zz_e, -zz_o, -spec.h_x * fx, -spec.h_z * fz]
    bound = 0.5 * dt**2 * sum(_comm_norm(parts[j], parts[i])
                              for i in range(4) for j in range(i + 1, 4))
    psi0 = kink_state("UUDDDDUU")
    trot = apply_circuit(psi0, trotter_first_order(spec, dt))
    ex = evolve_exact(psi0, diagonalize(H), dt)
    err = np.linalg.norm(trot - ex)
    assert err <= bound
    assert err > 0


def _op_err(builder, spec, dt, H):
    U = circuit_to_matrix(builder(spec, dt))
    return np.linalg.norm(U - expm(-1j * H * dt), 2)


def test_second_order_beats_first_order():
    spec = ModelSpec(4, 1.0, 3.0)
    H = build_hamiltonian(spec)
    assert 10 * _op_err(trotter_second_order, spec, 0.1, H) < _op_err(trotter_first_order, spec, 0.1, H)


def test_second_order_local_error_slope():
    spec = ModelSpec(4, 1.0, 3.0)
    H = build_hamiltonian(spec)
    dts = np.array([0.04, 0.02, 0.01, 0.005])
    errs = [_op_err(trotter_second_order, spec, dt, H) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert abs(slope - 3) <= 0.3
    assert 7 < errs[-2] / errs[-1] < 9


def test_expectation_z_cases(rng):
    assert expectation_z(kink_state("UUDDDDUU"), 4) == -1.0
    uni = np.ones(32) / np.sqrt(32)
    assert all(abs(expectation_z(uni, s)) < 1e-15 for s in range(1, 6))
    psi = random_state(5, rng)
    for s in range(1, 6):
        ref = np.vdot(psi, embed(Z, s, 5) @ psi).real
        assert abs(expectation_z(psi, s) - ref) <= 1e-14
    with pytest.raises(ValueError):
        expectation_z(psi, 6)


def test_sampling():
    psi = kink_state("UUDDDDUU")
    assert sample_expectation_z(psi, 4, shots=100, seed=3) == -1.0
    a = sample_expectation_z(0.2, None, 8192, seed=11)
    b = sample_expectation_z(0.2, None, 8192, seed=11)
    assert a == b
    with pytest.raises(ValueError):
        sample_expectation_z(0.0, None, 0)


def test_trotter_series_t0_only():
    s = run_trotter_series(ModelSpec(6, 1.0, 3.0), "UUDDUU", 0.1, 0.0)
    assert len(s) == 1 and s.values[0] == -1.0


def test_trotter_series_no_transverse_field():
    s = run_trotter_series(ModelSpec(6, 0.0, 2.5), "UUDDUU", 0.1, 3.0)
    assert np.max(np.abs(s.values - s.values[0])) <= 1e-12


def test_series_is_repeated_step():
    spec = ModelSpec(5, 1.0, 3.0)
    s = run_trotter_series(spec, "UUDUU", 0.1, 1.0)
    step = trotter_first_order(spec, 0.1)
    psi0 = kink_state("UUDUU")
    for k in (1, 4, 10):
        fresh = apply_circuit(psi0, step.repeat(k))
        assert s.values[k] == pytest.approx(expectation_z(fresh, 3), abs=1e-13)


def test_trotter_close_to_exact_and_shrinking():
    spec = ModelSpec(8, 1.0, 3.0)
    ed = run_exact_series(spec, "UUDDDDUU", 0.05, 10.0)
    e1 = np.max(np.abs(run_trotter_series(spec, "UUDDDDUU", 0.1, 10.0).values - ed.values[::2]))
    e2 = np.max(np.abs(run_trotter_series(spec, "UUDDDDUU", 0.05, 10.0).values - ed.values))
    assert e1 < 0.5
    assert e2 < e1


def _global_errors(dts, t_max=5.0, L=6):
    spec = ModelSpec(L, 1.0, 3.0)
    pattern = "UUDDUU"
    eig = diagonalize(build_hamiltonian(spec))
    out = []
    for dt in dts:
        ed = run_exact_series(spec, pattern, dt, t_max, eig=eig)
        tr = run_trotter_series(spec, pattern, dt, t_max)
        out.append(np.max(np.abs(tr.values - ed.values)))
    return np.array(out)


def test_trotter_state_error_first_order():
    # the state (not the z-basis observable) carries the first-order error;
    # dt = 0.2 is still pre-asymptotic for the state, so the grid starts at 0.1
    spec = ModelSpec(6, 1.0, 3.0)
    H = build_hamiltonian(spec)
    eig = diagonalize(H)
    psi0 = kink_state("UUDDUU")
    dts = np.array([0.1, 0.05, 0.025, 0.0125])
    errs = []
    for dt in dts:
        k = int(round(5.0 / dt))
        psi = apply_circuit(psi0, trotter_first_order(spec, dt).repeat(k))
        errs.append(np.linalg.norm(psi - evolve_exact(psi0, eig, 5.0)))
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert abs(slope - 1.0) <= 0.15


def test_shot_series_deterministic():
    spec = ModelSpec(4, 1.0, 3.0)
    a = run_trotter_series(spec, "UDDU", 0.1, 1.0, shots=512, seed=5)
    b = run_trotter_series(spec, "UDDU", 0.1, 1.0, shots=512, seed=5)
    np.testing.assert_array_equal(a.values, b.values)
    c = run_trotter_series(spec, "UDDU", 0.1, 1.0, shots=512, seed=6)
    assert not np.array_equal(a.values, c.values)


def test_text_round_trip(rng):
    c = random_circuit(4, 4, rng) + trotter_first_order(ModelSpec(4, 1.0, 3.0), 0.1)
    text = dumps_circuit(c)
    back = loads_circuit(text)
    assert back.L == 4 and back.depth == c.depth
    np.testing.assert_array_equal(circuit_to_matrix(back), circuit_to_matrix(c))
    assert "---" in text
    line = next(l for l in text.splitlines() if l.startswith("RZZ"))
    assert len(line.split()) == 4
