import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.sparse.linalg import eigsh
from scipy.sparse import csr_matrix, identity, kron

from isingmeson.model import (
    E8_RATIOS, GOLDEN, KinkPattern, ModelSpec, build_hamiltonian, central_site, e8_reference,
    kink_state,
)

X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.diag([1.0, -1.0])
I2 = np.eye(2)


def sparse_tfim(L, hx, hz):
    """Independent sparse Kronecker assembly, site 1 leftmost."""
    def op(o, i):
        m = csr_matrix(np.eye(1))
        for j in range(L):
            m = kron(m, csr_matrix(o if j == i else I2), format="csr")
        return m
    H = csr_matrix((1 << L, 1 << L))
    for i in range(L - 1):
        H = H - op(Z, i) @ op(Z, i + 1)
    for i in range(L):
        H = H - hx * op(X, i) - hz * op(Z, i)
    return H


def test_pure_zz_two_sites():
    H = build_hamiltonian(ModelSpec(2, 0.0, 0.0))
    np.testing.assert_array_equal(H, np.diag([-1.0, 1.0, 1.0, -1.0]))


def test_two_site_transverse_against_hand_matrix():
    # basis uu, ud, du, dd
    hand = np.array([
        [-1, -1, -1, 0],
        [-1, 1, 0, -1],
        [-1, 0, 1, -1],
        [0, -1, -1, -1],
    ], dtype=float)
    H = build_hamiltonian(ModelSpec(2, 1.0, 0.0))
    np.testing.assert_array_equal(H, hand)
    # characteristic polynomial roots of the hand matrix
    roots = np.sort(np.roots(np.poly(hand)).real)
    np.testing.assert_allclose(np.linalg.eigvalsh(H), roots, atol=1e-10)
    np.testing.assert_allclose(roots, [-np.sqrt(5), -1, 1, np.sqrt(5)], atol=1e-10)


def test_ground_state_matches_lanczos():
    spec = ModelSpec(8, 1.0, 3.0)
    e0 = np.linalg.eigvalsh(build_hamiltonian(spec))[0]
    ref = eigsh(sparse_tfim(8, 1.0, 3.0), k=1, which="SA", tol=1e-14)[0][0]
    assert abs(e0 - ref) < 1e-10


@pytest.mark.parametrize("L", [2, 3, 5])
def test_matches_kronecker_assembly(L):
    H = build_hamiltonian(ModelSpec(L, 0.7, -1.3))
    np.testing.assert_allclose(H, sparse_tfim(L, 0.7, -1.3).toarray(), atol=1e-14)


def test_guards():
    with pytest.raises(ValueError):
        ModelSpec(1)
    with pytest.raises(ValueError):
        build_hamiltonian(ModelSpec(15))
    with pytest.raises(ValueError):
        ModelSpec(4, boundary="periodic")


@given(st.integers(2, 6), st.floats(-3, 3), st.floats(-3, 3))
def test_hermitian(L, hx, hz):
    H = build_hamiltonian(ModelSpec(L, hx, hz))
    assert np.max(np.abs(H - H.conj().T)) <= 1e-14 * max(1.0, np.linalg.norm(H))


@pytest.mark.parametrize("L", [3, 6])
def test_zz_part_commutes_with_each_z(L):
    Hzz = build_hamiltonian(ModelSpec(L, 0.0, 0.0))
    for k in range(L):
        Zk = sparse_tfim_z(L, k)
        assert np.max(np.abs(Hzz @ Zk - Zk @ Hzz)) == 0.0


def sparse_tfim_z(L, k):
    m = np.eye(1)
    for j in range(L):
        m = np.kron(m, Z if j == k else I2)
    return m


@given(st.integers(2, 6), st.floats(-2, 2), st.floats(-2, 2))
def test_global_flip_maps_hz_to_minus_hz(L, hx, hz):
    Xbar = np.eye(1)
    for _ in range(L):
        Xbar = np.kron(Xbar, X)
    a = np.linalg.eigvalsh(build_hamiltonian(ModelSpec(L, hx, hz)))
    b = np.linalg.eigvalsh(Xbar @ build_hamiltonian(ModelSpec(L, hx, -hz)) @ Xbar)
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_kink_state_ordering():
    psi = kink_state("UU")
    assert psi[0] == 1 and np.count_nonzero(psi) == 1
    assert kink_state("DU")[0b10] == 1
    assert kink_state("UD")[0b01] == 1


def test_kink_state_site_four():
    from isingmeson.circuit import expectation_z

    psi = kink_state("UUDDDDUU")
    assert np.count_nonzero(psi) == 1
    assert expectation_z(psi, 4) == -1.0
    assert expectation_z(psi, 1) == 1.0


def test_eleven_site_kink_norm():
    psi = kink_state("UUDDDDDDDUU")
    assert psi.shape == (2 ** 11,)
    assert np.linalg.norm(psi) == 1.0


def test_kink_pattern_validation():
    with pytest.raises(ValueError):
        KinkPattern("UUXD")
    with pytest.raises(ValueError):
        kink_state("UUD", L=4)
    assert str(KinkPattern("uudd")) == "UUDD"


@given(st.text(alphabet="UD", min_size=1, max_size=10))
def test_kink_state_single_amplitude(s):
    psi = kink_state(s)
    assert np.count_nonzero(psi) == 1
    assert np.linalg.norm(psi) == 1.0


@pytest.mark.parametrize("L,site", [(8, 4), (11, 6), (5, 3), (2, 1), (6, 3)])
def test_central_site(L, site):
    assert central_site(L) == site


def test_central_site_rejects_short_chain():
    with pytest.raises(ValueError):
        central_site(1)


def test_e8_reference_table():
    ref = e8_reference(1.0)
    assert [lab for lab, _ in ref.entries] == ["m2-m1", "m1", "m2", "m1+m2"]
    np.testing.assert_allclose([v for _, v in ref.entries], [0.618, 1.0, 1.618, 2.618])


def test_e8_reference_scales_linearly():
    np.testing.assert_allclose([v for _, v in e8_reference(2.0).entries],
                               [1.236, 2.0, 3.236, 5.236])


def test_e8_golden_ratio():
    ref = e8_reference(1.0).as_dict()
    assert abs(ref["m2"] / ref["m1"] - GOLDEN) < 5e-4
    assert abs(ref["m2-m1"] - (GOLDEN - 1)) < 5e-4


@given(st.floats(1e-3, 1e3))
def test_e8_entries_increasing(m1):
    vals = [v for _, v in e8_reference(m1).entries]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert len(vals) == len(E8_RATIOS)


@pytest.mark.parametrize("m1", [0.0, -1.0])
def test_e8_rejects_nonpositive(m1):
    with pytest.raises(ValueError):
        e8_reference(m1)
