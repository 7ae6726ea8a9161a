"""Channel model tests: Bessel J0, slot correlation, path sampling, and the
geometric / i.i.d. fading laws.

J0 gets two independent checks: frozen literature values and a direct
numerical evaluation of its integral representation.
"""

import math

import numpy as np
import pytest

from omnisync.channel import (
    SEC6_DOPPLER_HZ,
    SEC6_SLOT_INTERVAL_S,
    ChannelConfig,
    bessel_j0,
    correlation_matrix,
    iid_channel,
    realize_channel,
    sample_paths,
    steering,
    uniform_gains,
)


def sec6_config(k, m_t=4, m_r=4, p=1, beta=None, model="geometric"):
    return ChannelConfig(m_t=m_t, m_r=m_r, p=p,
                         beta=beta if beta is not None else uniform_gains(p),
                         f_d=SEC6_DOPPLER_HZ, t_s=SEC6_SLOT_INTERVAL_S, k=k, model=model)


def j0_integral(x, panels=4096):
    """(1/pi) * integral of cos(x sin theta) over [0, pi], trapezoid rule.

    The integrand has vanishing odd derivatives at both endpoints, so the
    trapezoid rule converges far beyond the 1e-10 comparison tolerance.
    """
    theta = np.linspace(0.0, np.pi, panels + 1)
    return float(np.trapezoid(np.cos(x * np.sin(theta)), theta) / np.pi)


# ===== Bessel J0 =====


@pytest.mark.parametrize("x,expected", [
    (0.0, 1.0),
    (1.0, 0.7651976865579666),
    (5.0, -0.1775967713143383),
    (10.0, -0.2459357644513483),
])
def test_bessel_j0_literature_values(x, expected):
    assert abs(bessel_j0(x) - expected) <= 1e-9


def test_bessel_j0_first_zero():
    assert abs(bessel_j0(2.404825557695773)) <= 1e-9


def test_bessel_j0_matches_integral_representation():
    rng = np.random.default_rng(41)
    for x in rng.uniform(0.0, 40.0, size=25):
        got = bessel_j0(float(x))
        want = j0_integral(float(x))
        assert abs(got - want) <= 1e-8, f"J0({x:.4f}) = {got!r}, integral {want!r}"


def test_bessel_j0_even_in_x():
    assert bessel_j0(-3.7) == bessel_j0(3.7)


# ===== Slot correlation =====


def test_correlation_matrix_frozen_values():
    corr = correlation_matrix(sec6_config(3))
    psi = corr.psi
    assert psi.shape == (3, 3)
    assert np.allclose(np.diag(psi), 1.0, atol=1e-15)
    assert abs(psi[0, 1] + 0.1052315288159432) <= 1e-10
    assert abs(psi[0, 2] + 0.09791256842313789) <= 1e-10
    assert psi[1, 2] == psi[0, 1]
    assert np.array_equal(psi, psi.T)


def test_correlation_matrix_is_toeplitz_in_j0():
    config = ChannelConfig(m_t=2, m_r=2, p=1, beta=(1.0,), f_d=300.0, t_s=1e-3, k=6)
    psi = correlation_matrix(config).psi
    for i in range(6):
        for j in range(6):
            want = bessel_j0(2.0 * math.pi * 300.0 * 1e-3 * abs(i - j))
            assert abs(psi[i, j] - want) <= 1e-14


def test_correlation_factor_reproduces_matrix():
    config = ChannelConfig(m_t=2, m_r=2, p=1, beta=(1.0,), f_d=300.0, t_s=1e-3, k=8)
    corr = correlation_matrix(config)
    assert np.max(np.abs(corr.sqrt_factor @ corr.sqrt_factor.T - corr.psi)) <= 1e-12


def test_zero_doppler_collapses_to_rank_one():
    config = ChannelConfig(m_t=2, m_r=2, p=1, beta=(1.0,), f_d=0.0, t_s=1e-3, k=5)
    corr = correlation_matrix(config)
    assert np.allclose(corr.psi, 1.0, atol=1e-15)
    live_columns = int(np.sum(np.any(np.abs(corr.sqrt_factor) > 1e-12, axis=0)))
    assert live_columns == 1, f"all-ones correlation should factor through rank 1, got {live_columns}"
    assert np.max(np.abs(corr.sqrt_factor @ corr.sqrt_factor.T - 1.0)) <= 1e-12


# ===== Config validation =====


@pytest.mark.parametrize("kwargs", [
    dict(p=0, beta=()),
    dict(beta=(0.5, 0.5)),          # count disagrees with p=1
    dict(beta=(0.7,)),              # does not sum to 1
    dict(beta=(-1.0,)),
    dict(model="rayleigh-ish"),
])
def test_channel_config_rejects_bad_values(kwargs):
    base = dict(m_t=4, m_r=4, p=1, beta=(1.0,), f_d=100.0, t_s=1e-3, k=2)
    base.update(kwargs)
    with pytest.raises(ValueError):
        ChannelConfig(**base)


def test_channel_config_rejects_bad_timing():
    with pytest.raises(ValueError):
        ChannelConfig(m_t=4, m_r=4, p=1, beta=(1.0,), f_d=-1.0, t_s=1e-3, k=2)
    with pytest.raises(ValueError):
        ChannelConfig(m_t=4, m_r=4, p=1, beta=(1.0,), f_d=100.0, t_s=0.0, k=2)


def test_uniform_gains_sum_to_one():
    assert uniform_gains(4) == (0.25, 0.25, 0.25, 0.25)
    gains = uniform_gains(3)
    assert abs(sum(gains) - 1.0) <= 1e-12
    sec6_config(2, p=3, beta=gains)  # must satisfy the config validator


# ===== Steering and path sampling =====


def test_steering_hand_values():
    v = steering(0.25, 4)
    assert np.allclose(v, [1.0, 1.0j, -1.0, -1.0j], atol=1e-15)
    assert np.allclose(np.abs(steering(0.37, 8)), 1.0, atol=1e-15)


def test_sample_paths_deterministic_and_ordered():
    config = sec6_config(2, p=2, beta=(0.5, 0.5))
    paths_a = sample_paths(config, 9)
    paths_b = sample_paths(config, 9)
    assert np.array_equal(paths_a.theta_r, paths_b.theta_r)
    assert np.array_equal(paths_a.theta_t, paths_b.theta_t)
    rng = np.random.default_rng(9)
    assert np.array_equal(paths_a.theta_r, rng.random(2)), "arrival angles drawn first"
    assert np.array_equal(paths_a.theta_t, rng.random(2))
    assert np.all((paths_a.theta_r >= 0) & (paths_a.theta_r < 1))


# ===== Fading realizations =====


def test_realize_channel_is_rank_one_per_slot():
    config = sec6_config(2)
    paths = sample_paths(config, 3)
    corr = correlation_matrix(config)
    real = realize_channel(config, paths, corr, 11)
    u = steering(float(paths.theta_r[0]), 4)
    v = steering(float(paths.theta_t[0]), 4)
    for k in range(2):
        expected = real.alpha[0, k] * np.outer(u, v.conj())
        assert np.max(np.abs(real.h[k] - expected)) <= 1e-12


def test_realize_channel_gain_moments():
    """Sample moments of the per-path gains match beta and the slot correlation."""
    config = sec6_config(2, p=2, beta=(0.75, 0.25))
    paths = sample_paths(config, 5)
    corr = correlation_matrix(config)
    rng = np.random.default_rng(17)
    draws = np.stack([realize_channel(config, paths, corr, rng).alpha for _ in range(3000)])
    power = np.mean(np.abs(draws) ** 2, axis=0)
    assert np.max(np.abs(power[0] - 0.75)) <= 0.06, f"path 0 power {power[0]}"
    assert np.max(np.abs(power[1] - 0.25)) <= 0.06, f"path 1 power {power[1]}"
    cross = np.mean(draws[:, 0, 0] * np.conj(draws[:, 0, 1])) / 0.75
    assert abs(cross.real - corr.psi[0, 1]) <= 0.08
    assert abs(cross.imag) <= 0.08
    assert abs(np.mean(draws[:, 0, 0])) <= 0.05


def test_iid_channel_moments():
    config = sec6_config(2, m_t=3, m_r=2, model="iid")
    rng = np.random.default_rng(23)
    draws = np.stack([np.stack(iid_channel(config, rng).h) for _ in range(3000)])
    assert draws.shape == (3000, 2, 2, 3)
    assert abs(float(np.mean(np.abs(draws) ** 2)) - 1.0) <= 0.05
    assert abs(float(np.abs(np.mean(draws)))) <= 0.05
    cross = np.mean(draws[:, 0] * np.conj(draws[:, 1]))
    psi01 = correlation_matrix(config).psi[0, 1]
    assert abs(cross.real - psi01) <= 0.05, f"cross-slot correlation {cross.real:.4f} vs {psi01:.4f}"
    assert abs(cross.imag) <= 0.05


def test_iid_channel_deterministic_for_seed():
    config = sec6_config(2, m_t=3, m_r=2, model="iid")
    h_a = iid_channel(config, 31)
    h_b = iid_channel(config, 31)
    for a, b in zip(h_a.h, h_b.h):
        assert np.array_equal(a, b)
    assert h_a.alpha is None
