import numpy as np
import pytest

from isingmeson.compress import (
    BrickwallAnsatz, OptimizeOptions, cost, environments, optimize, target_operator, trotter_brickwall,
)
from isingmeson.model import ModelSpec
from isingmeson.mpo import MPOperator, MPOToleranceError

from conftest import haar_unitary


def test_identity_at_t0():
    M = target_operator(ModelSpec(6), 0.0, mode="mpo")
    assert M.bond_dims == [1] * 5
    np.testing.assert_allclose(M.to_dense(), np.eye(64), atol=1e-15)


def test_boundary_bonds():
    M = target_operator(ModelSpec(5), 0.3, mode="mpo")
    assert M.site_tensors[0].shape[0] == 1 and M.site_tensors[-1].shape[3] == 1
    with pytest.raises(ValueError):
        MPOperator([np.zeros((2, 2, 2, 1))])


def test_matches_dense_target():
    spec, tol = ModelSpec(6, 1.0, 3.0), 1e-10
    M = target_operator(spec, 0.1, mode="mpo", tol=tol)
    D = M.to_dense()
    assert np.max(np.abs(D - target_operator(spec, 0.1))) <= 1e-8
    assert np.max(np.abs(D.conj().T @ D - np.eye(64))) <= 10 * tol


def test_from_dense_round_trip(rng):
    U = haar_unitary(16, rng)
    M = MPOperator.from_dense(U)
    np.testing.assert_allclose(M.to_dense(), U, atol=1e-12)
    assert M.trace() == pytest.approx(np.trace(U), abs=1e-12)


@pytest.mark.parametrize("L", [4, 6, 8])
def test_cost_agrees_with_dense(L, rng):
    spec = ModelSpec(L, 1.0, 3.0)
    t = 0.5
    # random gates entangle more than a Trotter circuit; raise the bond cap
    M = target_operator(spec, t, mode="mpo", tol=1e-10, max_bond=256)
    U = M.to_dense()
    W = BrickwallAnsatz(L, [[haar_unitary(4, rng) for _ in BrickwallAnsatz.bonds(L, l)]
                            for l in range(4)])
    for V in (W, trotter_brickwall(spec, t, 5)):
        assert abs(cost(M, V) - cost(U, V)) <= 1e-8


def test_environments_agree_with_dense(rng):
    spec = ModelSpec(6, 1.0, 3.0)
    M = target_operator(spec, 0.4, mode="mpo")
    U = M.to_dense()
    W = trotter_brickwall(spec, 0.4, 5)
    em, tm = environments(M, W)
    ed, td = environments(U, W)
    assert abs(tm - td) <= 1e-10
    for a, b in zip(em, ed):
        for x, y in zip(a, b):
            assert np.max(np.abs(x - y)) <= 1e-10


def test_optimize_on_mpo_target():
    spec = ModelSpec(6, 1.0, 3.0)
    M = target_operator(spec, 0.5, mode="mpo")
    res = optimize(M, trotter_brickwall(spec, 0.5, 5), OptimizeOptions(max_iters=10))
    assert np.all(np.diff(res.costs) <= 0)
    assert res.costs[-1] < res.costs[0]


def test_bond_cap_enforced():
    with pytest.raises(MPOToleranceError):
        target_operator(ModelSpec(8, 1.0, 3.0), 2.0, mode="mpo", tol=1e-12, max_bond=8)
