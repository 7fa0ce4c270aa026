import numpy as np
import pytest

from lossycacc.errors import ConfigurationError
from lossycacc.lifting import assemble_lifted_state, lift, split_lifted_state
from lossycacc.model import DiscreteModel, discretize
from oracles import freq_response, simulate_delayed


def _random_model(seed, n=3):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    A *= 0.9 / np.abs(np.linalg.eigvals(A)).max()
    return DiscreteModel(
        A=A,
        B=rng.normal(size=(n, 1)),
        E=rng.normal(size=(n, 1)),
        C=np.eye(n)[:2],
        Cz=rng.normal(size=(2, n)),
        Dxi=np.array([[0.0], [1.0]]),
        eps_weight=1.0,
        r_weight=1.0,
    )


def test_default_order(default_params):
    assert lift(discretize(default_params), default_params.d).N == 43


def test_d_one_structure(default_params):
    m = discretize(default_params)
    L = lift(m, 1)
    assert L.N == 5
    expected = np.zeros((5, 5))
    expected[:3, :3] = m.A
    expected[:3, 3] = m.B[:, 0]
    expected[:3, 4] = m.E[:, 0]
    np.testing.assert_array_equal(L.Ad, expected)
    np.testing.assert_array_equal(L.Bd.ravel(), [0, 0, 0, 1, 0])
    np.testing.assert_array_equal(L.Ed.ravel(), [0, 0, 0, 0, 1])


def test_d_zero_rejected(default_params):
    with pytest.raises(ConfigurationError):
        lift(discretize(default_params), 0)


def test_sparsity_mask(default_params):
    m = discretize(default_params)
    d = 4
    L = lift(m, d)
    mask = np.zeros((3 + 2 * d,) * 2, dtype=bool)
    mask[:3, :3] = m.A != 0
    mask[:3, 3] = mask[:3, 3 + d] = True
    for j in range(d - 1):
        mask[3 + j, 4 + j] = mask[3 + d + j, 4 + d + j] = True
    np.testing.assert_array_equal(L.Ad != 0, mask)
    np.testing.assert_array_equal(L.Cd[:, :3], m.Cz)
    assert not L.Cd[:, 3:].any()
    np.testing.assert_array_equal(L.R_perf, m.Dxi)


def test_trajectory_equivalence():
    m = _random_model(0)
    d, K = 3, 50
    L = lift(m, d)
    rng = np.random.default_rng(5)
    xi, nu = rng.normal(size=K), rng.normal(size=K)
    ref = simulate_delayed(m.A, m.B, m.E, d, xi, nu)
    xe = np.zeros(L.N)
    for k in range(K):
        np.testing.assert_allclose(xe[:3], ref[k], atol=1e-12)
        xe = L.Ad @ xe + L.Bd.ravel() * xi[k] + L.Ed.ravel() * nu[k]


@pytest.mark.parametrize("d", [1, 2, 5])
def test_transfer_function_equivalence(d):
    m = _random_model(d)
    L = lift(m, d)
    for z in np.exp(2j * np.pi * np.arange(512) / 512):
        base = freq_response(m.A, m.E, m.Cz, np.zeros((2, 1)), z) * z ** (-d)
        lifted = freq_response(L.Ad, L.Ed, L.Cd, np.zeros((2, 1)), z)
        np.testing.assert_allclose(lifted, base, atol=1e-9)
        base_xi = freq_response(m.A, m.B, m.Cz, np.zeros((2, 1)), z) * z ** (-d) + m.Dxi
        lifted_xi = freq_response(L.Ad, L.Bd, L.Cd, L.R_perf, z)
        np.testing.assert_allclose(lifted_xi, base_xi, atol=1e-9)


def test_assemble_ordering_and_roundtrip():
    xe = assemble_lifted_state([1, 2, 3], [10, 11], [20, 21])
    np.testing.assert_array_equal(xe, [1, 2, 3, 10, 11, 20, 21])
    x, xi, nu = split_lifted_state(xe, 3, 2)
    np.testing.assert_array_equal(x, [1, 2, 3])
    np.testing.assert_array_equal(xi, [10, 11])
    np.testing.assert_array_equal(nu, [20, 21])
    np.testing.assert_array_equal(assemble_lifted_state(np.zeros(3), np.zeros(4), np.zeros(4)), np.zeros(11))


def test_assemble_rejects_bad_lengths():
    with pytest.raises(ValueError):
        assemble_lifted_state([0, 0, 0], [1, 2], [1])
    with pytest.raises(ValueError):
        split_lifted_state(np.zeros(6), 3, 2)


def test_history_layout_matches_slices(default_params):
    L = lift(discretize(default_params), 3)
    xe = assemble_lifted_state([0, 0, 0], [1, 2, 3], [4, 5, 6])
    np.testing.assert_array_equal(xe[L.xi_slice()], [1, 2, 3])
    np.testing.assert_array_equal(xe[L.nu_slice()], [4, 5, 6])
    # one step with new inputs 7 and 8 shifts both chains towards the oldest slot
    nxt = L.Ad @ xe + L.Bd.ravel() * 7 + L.Ed.ravel() * 8
    np.testing.assert_array_equal(nxt[L.xi_slice()], [2, 3, 7])
    np.testing.assert_array_equal(nxt[L.nu_slice()], [5, 6, 8])
