from types import SimpleNamespace

import numpy as np
import pytest

from lossycacc.errors import SynthesisError
from lossycacc.model import discretize
from lossycacc.observer import ObserverGains, observer_step, synthesize_uio


@pytest.fixture(scope="module")
def model(default_params):
    return discretize(default_params)


@pytest.fixture(scope="module")
def gains(model):
    return synthesize_uio(model)


def test_decoupling_and_identities(model, gains):
    np.testing.assert_allclose(gains.H @ model.C @ model.E, model.E, atol=1e-12)
    np.testing.assert_allclose(gains.G @ model.E, 0.0, atol=1e-12)
    np.testing.assert_allclose(gains.F, model.A - gains.K1 @ model.C - gains.H @ model.C @ model.A, atol=1e-12)
    np.testing.assert_allclose(gains.K2, gains.F @ gains.H, atol=1e-12)
    np.testing.assert_allclose(gains.K, gains.K1 + gains.K2, atol=1e-12)
    np.testing.assert_allclose(gains.G, np.eye(3) - gains.H @ model.C, atol=1e-15)


def test_deadbeat(gains):
    F3 = np.linalg.matrix_power(gains.F, 3)
    assert np.abs(F3).max() <= 1e-9
    assert np.abs(np.linalg.eigvals(gains.F)).max() < 1e-4


def test_hand_computed_h():
    m = SimpleNamespace(
        A=np.array([[1.0, 1.0], [0.0, 1.0]]),
        B=np.array([[0.0], [1.0]]),
        E=np.array([[0.0], [1.0]]),
        C=np.eye(2),
    )
    g = synthesize_uio(m)
    np.testing.assert_allclose(g.H, [[0.0, 0.0], [0.0, 1.0]], atol=1e-15)
    assert np.abs(np.linalg.matrix_power(g.F, 2)).max() < 1e-12


def test_ce_not_injective():
    m = SimpleNamespace(A=np.eye(2), B=np.ones((2, 1)), E=np.array([[0.0], [1.0]]), C=np.array([[1.0, 0.0]]))
    with pytest.raises(SynthesisError):
        synthesize_uio(m)


def test_unobservable_pair():
    m = SimpleNamespace(
        A=np.diag([0.5, 0.7, 0.9]),
        B=np.ones((3, 1)),
        E=np.array([[0.0], [1.0], [0.0]]),
        C=np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]),
    )
    with pytest.raises(SynthesisError):
        synthesize_uio(m)


def test_zero_step(gains):
    z, x = observer_step(gains, np.zeros(3), np.zeros(2), 0.0)
    assert not z.any() and not x.any()


def test_roundtrip(gains):
    back = ObserverGains.from_dict(gains.to_dict())
    for name in ("F", "G", "H", "K1", "K2", "K", "GB"):
        np.testing.assert_array_equal(getattr(back, name), getattr(gains, name))


def test_error_vanishes_regardless_of_unknown_input(model, gains):
    rng = np.random.default_rng(3)
    x = rng.normal(size=3)
    zeta = rng.normal(size=3)
    eps_prev = None
    for k in range(40):
        xi, nu = rng.normal(), 5 * rng.normal()
        y = model.C @ x
        zeta, x_hat = observer_step(gains, zeta, y, xi)
        eps = x - x_hat
        if eps_prev is not None:
            np.testing.assert_allclose(eps, gains.F @ eps_prev, atol=1e-10 * (1 + np.abs(x).max()))
        if k >= 3:
            assert np.abs(eps).max() <= 1e-9 * max(1.0, np.abs(x).max())
        eps_prev = eps
        x = model.A @ x + model.B.ravel() * xi + model.E.ravel() * nu
