import numpy as np
import pytest

from relaxator.bath import (
    UNIFORM,
    BathCorrelation,
    GridRangeError,
    correlation_function,
    correlation_time,
    gamma_bosonic,
    gamma_from_env_exact,
    gamma_phenomenological,
    hilbert,
    kms_violation,
    lorentzian,
    s_from_gamma,
    uniform_grid,
)
from relaxator.exact import random_hermitian

from conftest import lorentz_bath


def node(grid, x):
    i = int(np.argmin(np.abs(grid - x)))
    assert abs(grid[i] - x) < 1e-12
    return i


def test_bosonic_kms_ratio():
    grid = uniform_grid(10, 2001)
    bc = gamma_bosonic(1, 0.3, 1.0, grid)
    ratio = bc.gamma[node(grid, -1.0), 0, 0] / bc.gamma[node(grid, 1.0), 0, 0]
    assert ratio.real == pytest.approx(0.3679, abs=1e-4)
    assert abs(ratio - np.exp(-1)) < 1e-12
    assert kms_violation(bc) < 1e-8


def test_bosonic_zero_temperature_has_no_absorption():
    grid = uniform_grid(10, 2001)
    bc = gamma_bosonic(1, 0.3, 0.01, grid)
    assert bc.gamma[node(grid, -1.0), 0, 0].real < 1e-40
    assert bc.gamma[node(grid, 1.0), 0, 0].real > 0.1


def test_bosonic_zero_frequency_limit():
    grid = uniform_grid(10, 2001)
    i0 = node(grid, 0.0)
    # p > 1: vanishes; p = 1 (ohmic): the thermal occupation T/Omega cancels the density of states
    assert gamma_bosonic(2, 0.3, 1.0, grid).gamma[i0, 0, 0] == 0
    ohmic = gamma_bosonic(1, 0.3, 2.0, grid)
    assert ohmic.gamma[i0, 0, 0].real == pytest.approx(np.pi * 0.09 * 2.0, rel=1e-12)
    near = ohmic.gamma[i0 + 1, 0, 0].real
    assert near == pytest.approx(ohmic.gamma[i0, 0, 0].real, rel=1e-2)


def test_bosonic_rejects_bad_parameters():
    grid = uniform_grid(10, 101)
    with pytest.raises(ValueError):
        gamma_bosonic(1, 0.3, 0.0, grid)
    with pytest.raises(ValueError):
        gamma_bosonic(0.5, 0.3, 1.0, grid)


def test_phenomenological_extensions():
    grid = uniform_grid(10, 2001)
    th = gamma_phenomenological(lorentzian(0.1, 0.5), 0.7, grid)
    assert kms_violation(th) < 1e-12
    un = gamma_phenomenological(lorentzian(0.1, 0.5), None, grid, mode=UNIFORM)
    assert np.allclose(un.gamma[::-1], un.gamma)
    with pytest.raises(ValueError):
        gamma_phenomenological([[0.0, 0.1], [1.0, -0.1]], 1.0, grid)
    with pytest.raises(ValueError):
        gamma_phenomenological([[-1.0, 0.1]], 1.0, grid)


def test_flat_uniform_shift_vanishes_at_zero():
    grid = uniform_grid(20, 4001)
    bc = s_from_gamma(gamma_phenomenological([[0.0, 0.2], [5.0, 0.2]], None, grid, mode=UNIFORM))
    assert abs(bc.s[node(grid, 0.0), 0, 0]) < 1e-12
    assert np.allclose(bc.s[::-1], -bc.s, atol=1e-12)


def test_box_principal_value_closed_form():
    # (1/pi) P int_{-1}^{1} dx / (2 - x) = (1/pi) ln 3
    grid = uniform_grid(20, 40001)
    bc = s_from_gamma(gamma_phenomenological([[0.0, 1.0], [1.0, 1.0]], None, grid, mode=UNIFORM))
    assert bc.s[node(grid, 2.0), 0, 0].real == pytest.approx(np.log(3) / np.pi, abs=5e-4)
    assert np.log(3) / np.pi == pytest.approx(0.3497, abs=1e-4)


def test_lorentzian_shift_and_analytic_continuation():
    # gamma = g0/(1 + (W tau)^2) has g(z) = g0/(tau z + i) in the upper half plane
    bc = lorentz_bath(gamma0=0.1, tau_e=0.5, mode=UNIFORM)
    W = bc.grid
    inner = np.abs(W) < 5
    s_ref = 0.1 * 0.5 * W / (1 + (0.5 * W) ** 2)
    assert np.max(np.abs(bc.s[inner, 0, 0] - s_ref[inner])) < 2e-5
    z = np.array([0.3 + 0.2j, -1 + 0.05j, 2 + 1j])
    assert np.max(np.abs(bc.g_complex(z)[:, 0, 0] - 0.1 / (0.5 * z + 1j))) < 1e-5


def test_g_complex_matches_direct_quadrature(thermal_bath):
    bc = thermal_bath
    z = np.array([0.4 + 0.5j, -2.0 + 0.8j])
    w = np.full(bc.grid.size, bc.h)
    w[[0, -1]] /= 2
    direct = (w * bc.gamma[:, 0, 0]) @ (1 / (z[None, :] - bc.grid[:, None])) / np.pi
    assert np.allclose(bc.g_complex(z)[:, 0, 0], direct, atol=1e-6)
    # lattice (FFT) path agrees with the direct sum path
    zz = 0.01 + bc.h * np.arange(300) + 0.05j
    fast = bc.g_complex(zz)[:, 0, 0]
    slow = np.concatenate([bc.g_complex(zz[i:i + 100])[:, 0, 0] for i in range(0, 300, 100)])
    assert np.allclose(fast, slow, atol=1e-12)
    with pytest.raises(ValueError):
        bc.g_complex(np.array([0.3 - 0.1j]))


def test_g_complex_approaches_real_axis_table(thermal_bath):
    bc = thermal_bath
    x = np.array([0.25, 1.0, -1.5])
    assert np.allclose(bc.g_complex(x + 1e-7j), bc.g_at(x), atol=1e-4)


def test_thermal_interpolation_obeys_kms_off_grid(thermal_bath):
    bc = thermal_bath
    x = np.array([0.123, 0.777, 2.3456])
    T = bc.temperature
    assert np.allclose(bc.gamma_at(-x), np.exp(-x / T)[:, None, None] * bc.gamma_at(x), rtol=1e-9, atol=0)
    assert kms_violation(bc) < 1e-8


def test_shift_table_does_not_inherit_kms(thermal_bath):
    # the principal part of a KMS gamma is not KMS-paired itself; recorded, not asserted away
    assert kms_violation(thermal_bath, "s") > 1e-3


def test_gamma_hermitian_psd_and_shift_hermitian():
    grid = uniform_grid(10, 1001)
    bad = np.zeros((grid.size, 2, 2), complex)
    bad[:, 0, 1] = 1.0
    bad[:, 1, 0] = 1.0
    from relaxator.bath import _check_table
    with pytest.raises(ValueError):
        _check_table(BathCorrelation(grid, bad))
    rng = np.random.default_rng(5)
    A = random_hermitian(2, rng)
    M = A @ A
    good = np.exp(-grid ** 2)[:, None, None] * M[None]
    bc = s_from_gamma(BathCorrelation(grid, good))
    assert np.allclose(bc.s, np.conj(np.swapaxes(bc.s, 1, 2)))


def test_uniform_mode_requires_transpose_evenness():
    grid = uniform_grid(5, 101)
    M = np.array([[1.0, 0.5j], [-0.5j, 1.0]])
    odd = np.exp(-(grid - 0.5) ** 2)[:, None, None] * M[None]
    with pytest.raises(ValueError):
        BathCorrelation(grid, odd, mode=UNIFORM)
    even = np.exp(-grid ** 2)[:, None, None] * M[None]
    even[grid < 0] = np.swapaxes(even[grid < 0], 1, 2)
    even[grid == 0] = M.real  # gamma(0) has to be symmetric
    BathCorrelation(grid, even, mode=UNIFORM)


def test_out_of_grid_access_is_an_error(thermal_bath):
    with pytest.raises(GridRangeError):
        thermal_bath.gamma_at(np.array([41.0]))


def test_undecayed_table_warns():
    grid = uniform_grid(5, 101)
    with pytest.warns(RuntimeWarning):
        s_from_gamma(BathCorrelation(grid, np.ones(grid.size)))


def test_correlation_time_of_lorentzian():
    grid = uniform_grid(200, 40001)
    bc = gamma_phenomenological(lorentzian(0.1, 0.5), None, grid, mode=UNIFORM)
    # C(t) = (g0/tau) e^{-|t|/tau}; the Lorentzian tails beyond the grid cost ~ 2/(pi tau W_max)
    assert correlation_time(bc, t_max=20.0) == pytest.approx(0.5, rel=0.01)
    C = correlation_function(bc, np.array([0.0, 0.5]))[:, 0, 0]
    assert C[1].real / C[0].real == pytest.approx(np.exp(-1), rel=0.01)


def test_hilbert_involution_within_truncation():
    errs = []
    for W, n in ((20, 4001), (40, 8001)):
        g = uniform_grid(W, n)
        f = np.exp(-g ** 2)
        twice = hilbert(hilbert(f, g), g)
        errs.append(np.max(np.abs(twice + f)[np.abs(g) < 3]))
    assert errs[0] < 0.02
    assert errs[1] < 0.6 * errs[0]


def test_env_exact_trivial_coupling():
    grid = uniform_grid(5, 101)
    H_env = np.diag([0.0, 1.0, 2.5])
    bc = gamma_from_env_exact(H_env, [np.eye(3)], np.eye(3) / 3, 0.1, grid)
    assert np.allclose(bc.gamma, 0)
    with pytest.raises(ValueError):
        gamma_from_env_exact(H_env, [np.eye(3)], np.eye(3) / 3, 0.0, grid)


def test_env_exact_ground_state_mode_emits_only():
    grid = uniform_grid(5, 1001)
    eps = 0.05
    H_env = np.diag([0.0, 1.0])
    B = np.array([[0, 1], [1, 0]], complex)
    bc = gamma_from_env_exact(H_env, [B], np.diag([1.0, 0.0]), eps, grid)
    oracle = eps / ((grid - 1.0) ** 2 + eps ** 2)
    assert np.allclose(bc.gamma[:, 0, 0], oracle, atol=1e-12)
    assert grid[np.argmax(bc.gamma[:, 0, 0].real)] == pytest.approx(1.0)


def test_env_exact_matches_time_domain_transform(rng):
    H_env = random_hermitian(4, rng)
    E, U = np.linalg.eigh(H_env)
    rho = U @ np.diag(np.exp(-E) / np.exp(-E).sum()) @ U.conj().T
    B = random_hermitian(4, rng)
    eps = 0.2
    grid = uniform_grid(12, 241)
    bc = gamma_from_env_exact(H_env, [B], rho, eps, grid)
    dB = U.conj().T @ (B - np.trace(B @ rho) * np.eye(4)) @ U
    p = np.exp(-E) / np.exp(-E).sum()
    t = np.linspace(-80, 80, 16001)
    # <dB(t) dB> = sum_ab p_b |dB_ab|^2 e^{-i (E_a - E_b) t}
    amp = np.abs(dB) ** 2 * p[None, :]
    C = np.einsum("ab,tab->t", amp, np.exp(-1j * np.subtract.outer(E, E)[None] * t[:, None, None]))
    C = C * np.exp(-eps * np.abs(t))
    ft = 0.5 * np.trapezoid(np.exp(1j * np.outer(grid, t)) * C[None], t, axis=1)
    scale = np.max(np.abs(bc.gamma[:, 0, 0]))
    assert np.max(np.abs(ft - bc.gamma[:, 0, 0])) < 0.02 * scale
