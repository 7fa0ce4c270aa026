import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossycacc.errors import ConfigurationError
from lossycacc.model import VehicleParams, continuous_error_matrices, discretize, vehicle_zoh, zoh_matrices
from oracles import zoh_expm


def test_default_delays_in_samples(default_params):
    assert (default_params.d, default_params.r, default_params.m) == (20, 2, 5)


@pytest.mark.parametrize("field", ["phi", "theta", "psi"])
def test_fractional_delay_rejected(field):
    with pytest.raises(ConfigurationError):
        VehicleParams(**{field: 0.015})


@pytest.mark.parametrize("kw", [{"tau": 0.0}, {"tau": -1.0}, {"h": 0.0}, {"Ts": 0.0}, {"phi": -0.01}])
def test_invalid_params_rejected(kw):
    with pytest.raises(ConfigurationError):
        VehicleParams(**kw)


def test_continuous_matrices_substitution():
    Ac, Bc, Ec = continuous_error_matrices(VehicleParams(tau=0.1, h=0.25))
    assert Ac[2, 2] == pytest.approx(-10.0)
    assert Bc[1, 0] == pytest.approx(-2.5)
    assert Ec[2, 0] == pytest.approx(10.0)
    _, Bc, _ = continuous_error_matrices(VehicleParams(tau=0.1, h=0.1))
    assert Bc[2, 0] == 0.0
    _, Bc, _ = continuous_error_matrices(VehicleParams(tau=1.0, h=1e-300, phi=0, theta=0, psi=0))
    np.testing.assert_allclose(Bc.ravel(), [0.0, 0.0, -1.0], atol=1e-12)


def test_discretize_default_values(default_params):
    m = discretize(default_params)
    assert m.A[2, 2] == pytest.approx(0.9048374180359595, abs=1e-15)
    assert m.A[0, 1] == 0.01
    A, B, E = zoh_expm(0.1, 0.25, 0.01)
    np.testing.assert_allclose(m.A, A, rtol=0, atol=1e-12)
    np.testing.assert_allclose(m.B, B, rtol=0, atol=1e-12)
    np.testing.assert_allclose(m.E, E, rtol=0, atol=1e-12)


def test_output_matrices(default_params):
    m = discretize(default_params, weights=(0.3, 2.0))
    np.testing.assert_array_equal(m.C, [[1, 0, 0], [0, 1, 0]])
    np.testing.assert_array_equal(m.Cz, [[0.3, 0, 0], [0, 0, 0]])
    np.testing.assert_array_equal(m.Dxi, [[0.0], [2.0]])
    with pytest.raises(ConfigurationError):
        discretize(default_params, weights=(0.0, 1.0))


def test_zero_horizon_limit():
    A, B, E = zoh_matrices(0.1, 0.25, 1e-9)
    np.testing.assert_allclose(A, np.eye(3), atol=1e-6)
    np.testing.assert_allclose(B, 0, atol=1e-6)
    np.testing.assert_allclose(E, 0, atol=1e-6)


def test_middle_b_entry_uses_decaying_exponential():
    # The hold integral fixes the sign of the exponent in B[1].
    tau, h, Ts = 0.1, 0.25, 0.01
    _, B, _ = zoh_matrices(tau, h, Ts)
    expected = -Ts + (tau - h) * (1 - math.exp(-Ts / tau))
    assert B[1, 0] == pytest.approx(expected, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(
    tau=st.floats(0.05, 1.0),
    h=st.floats(0.1, 2.0),
    Ts=st.floats(0.001, 0.1),
)
def test_zoh_matches_matrix_exponential(tau, h, Ts):
    A, B, E = zoh_matrices(tau, h, Ts)
    Ao, Bo, Eo = zoh_expm(tau, h, Ts)
    for M, O in ((A, Ao), (B, Bo), (E, Eo)):
        np.testing.assert_allclose(M, O, rtol=0, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(tau=st.floats(0.05, 1.0), h=st.floats(0.1, 2.0), Ts=st.floats(0.001, 0.1))
def test_eigenvalues_are_double_integrator_plus_engine(tau, h, Ts):
    A, _, _ = zoh_matrices(tau, h, Ts)
    eig = np.sort(np.linalg.eigvals(A).real)
    np.testing.assert_allclose(eig, np.sort([1.0, 1.0, math.exp(-Ts / tau)]), atol=1e-12)


def test_error_definition_consistency():
    """Two vehicles advanced physically reproduce the error model over 1000 steps."""
    tau, h, Ts = 0.1, 0.25, 0.01
    A, B, E = zoh_matrices(tau, h, Ts)
    Phi, Gam = vehicle_zoh(tau, Ts)
    rng = np.random.default_rng(1)
    u_pred, u_own = rng.normal(size=1000), rng.normal(size=1000)
    s_pred, s_own = np.array([5.0, 1.0, 0.2]), np.array([0.0, 0.5, -0.1])

    def err(sp, so):
        return np.array([sp[0] - so[0] - h * so[1], sp[1] - so[1] - h * so[2], sp[2] - so[2] + h / tau * so[2]])

    x = err(s_pred, s_own)
    for k in range(1000):
        s_pred = Phi @ s_pred + Gam * u_pred[k]
        s_own = Phi @ s_own + Gam * u_own[k]
        x = A @ x + B.ravel() * u_own[k] + E.ravel() * u_pred[k]
        assert abs(err(s_pred, s_own)[0] - x[0]) < 1e-8


def test_vehicle_zoh_matches_expm():
    import scipy.linalg

    tau, Ts = 0.3, 0.02
    M = np.zeros((4, 4))
    M[:3, :3] = [[0, 1, 0], [0, 0, 1], [0, 0, -1 / tau]]
    M[2, 3] = 1 / tau
    X = scipy.linalg.expm(M * Ts)
    Phi, Gam = vehicle_zoh(tau, Ts)
    np.testing.assert_allclose(Phi, X[:3, :3], atol=1e-13)
    np.testing.assert_allclose(Gam, X[:3, 3], atol=1e-13)
