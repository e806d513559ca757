import math

import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import given
from hypothesis import strategies as st

from cavitywp.grid import make_grid
from cavitywp.models import ModelSpec, split_for
from cavitywp.oracles import jc_inversion_exact
from cavitywp.propagator import (
    NumericalAbort,
    PropagationConfig,
    SplitOperatorPropagator,
    expm_channel,
    propagate,
    strang_step,
)
from cavitywp.states import (
    MultiChannelWavefunction,
    coherent_state,
    compose_initial,
    fock_state,
    fock_superposition,
)
from conftest import random_state

GRID = make_grid(256, 12.0)


def hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def power_series_expm(h, dt, terms=20):
    out = np.eye(len(h), dtype=complex)
    term = np.eye(len(h), dtype=complex)
    for k in range(1, terms + 1):
        term = term @ (-1j * dt * h) / k
        out = out + term
    return out


# ------------------------------------------------------------------ config

def test_config_validation():
    assert PropagationConfig(0.01, 1.0).n_steps == 100
    for bad in (dict(dt=0, t_final=1), dict(dt=-1, t_final=1), dict(dt=1, t_final=0.5),
                dict(dt=0.1, t_final=1, snapshot_stride=0), dict(dt=0.1, t_final=1, snapshot_stride=1.5)):
        with pytest.raises(ValueError):
            PropagationConfig(**bad)


# ------------------------------------------------------------ expm_channel

def test_expm_zero_time_is_identity(rng):
    np.testing.assert_allclose(expm_channel(hermitian(rng, 2), 0.0), np.eye(2), atol=0)
    np.testing.assert_allclose(expm_channel(hermitian(rng, 3), 0.0), np.eye(3), atol=1e-15)


def test_expm_diagonal():
    u = expm_channel(np.diag([0.3, -1.1]), 0.7)
    np.testing.assert_allclose(u, np.diag(np.exp(-1j * np.array([0.3, -1.1]) * 0.7)), atol=1e-15)


def test_expm_2x2_against_power_series(rng):
    for _ in range(20):
        h = hermitian(rng, 2)
        dt = 0.5 / np.linalg.norm(h, 2)
        np.testing.assert_allclose(expm_channel(h, dt), power_series_expm(h, dt), atol=1e-12)


def test_expm_3x3_against_scipy(rng):
    h = hermitian(rng, 3, 2.0)
    np.testing.assert_allclose(expm_channel(h, 0.37), sl.expm(-1j * 0.37 * h), atol=1e-13)


def test_expm_batched_matches_single(rng):
    hs = np.array([hermitian(rng, 2) for _ in range(5)])
    batch = expm_channel(hs, 0.2)
    for h, u in zip(hs, batch):
        np.testing.assert_allclose(u, expm_channel(h, 0.2), atol=1e-15)


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]), st.floats(1e-4, 10.0))
def test_expm_unitary(seed, n, dt):
    u = expm_channel(hermitian(np.random.default_rng(seed), n, 3.0), dt)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(n), atol=1e-13)


def test_expm_rejects_non_hermitian():
    with pytest.raises(ValueError):
        expm_channel(np.array([[0, 1], [0, 0]]), 0.1)
    with pytest.raises(ValueError):
        expm_channel(np.array([[1j, 0, 0], [0, 0, 0], [0, 0, 0]]), 0.1)


# ------------------------------------------------------------- strang step

def test_harmonic_eigenstate_phase():
    spec = ModelSpec("rabi", omega=0.0, g0=0.0)
    n, dt = 3, 1e-3
    psi = compose_initial(fock_state(n, GRID), [1, 0], GRID)
    out = strang_step(psi, split_for(spec), dt)
    np.testing.assert_allclose(out.channels, psi.channels * np.exp(-1j * (n + 0.5) * dt), atol=1e-9)


def test_jc_ground_state_stationary():
    spec = ModelSpec("jc", omega=0.8, g0=0.6)
    psi = compose_initial(fock_state(0, GRID), [0, 1], GRID)
    prop = SplitOperatorPropagator(split_for(spec), GRID, 1e-3)
    amps = prop.advance(psi.channels.copy(), 1000)
    phase = np.vdot(psi.channels[1], amps[1]) * GRID.dx
    assert abs(phase) == pytest.approx(1.0, abs=1e-12)
    assert np.angle(phase) == pytest.approx(-(0.5 - 0.4), abs=1e-6)  # E = (1 - Omega)/2, t = 1
    # an exact eigenstate of H, but not of the split steps: O(dt^2) leakage only
    np.testing.assert_allclose(amps, phase * psi.channels, atol=1e-6)


def test_strang_is_second_order(rng):
    split = split_for(ModelSpec("rabi", omega=1.0, g0=0.7))
    psi = MultiChannelWavefunction(random_state(rng, 2, GRID), GRID)

    def local_error(dt):
        one = strang_step(psi, split, dt).channels
        two = strang_step(strang_step(psi, split, dt / 2), split, dt / 2).channels
        return np.sqrt(np.sum(np.abs(one - two) ** 2) * GRID.dx)

    e1, e2 = local_error(0.02), local_error(0.01)
    assert e1 / e2 == pytest.approx(8.0, rel=0.05)


@pytest.mark.parametrize("kind", ["rabi", "jc", "lambda"])
def test_step_preserves_norm(kind, rng):
    spec = ModelSpec(kind, omega=0.7, g0=1.1, lambda1=0.5, lambda2=-0.3)
    n_ch = spec.n_channels
    psi = MultiChannelWavefunction(random_state(rng, n_ch, GRID), GRID)
    out = strang_step(psi, split_for(spec), 0.05)
    assert out.norm() == pytest.approx(1.0, abs=1e-12)


def test_advance_fusion_equals_repeated_steps(rng):
    split = split_for(ModelSpec("jc", omega=1.2, g0=0.4))
    psi = MultiChannelWavefunction(random_state(rng, 2, GRID), GRID)
    prop = SplitOperatorPropagator(split, GRID, 0.01)
    fused = prop.advance(psi.channels.copy(), 7)
    step = psi
    for _ in range(7):
        step = strang_step(step, split, 0.01)
    np.testing.assert_allclose(fused, step.channels, atol=1e-13)


def test_step_checks_channel_count():
    psi = compose_initial(fock_state(0, GRID), [1, 0], GRID)
    with pytest.raises(ValueError):
        strang_step(psi, split_for(ModelSpec("lambda", omega=1.0, lambda1=1.0)), 0.1)


# --------------------------------------------------------------- propagate

def test_free_coherent_state_oscillates():
    nu = 1.5
    psi = compose_initial(coherent_state(nu, GRID), [1, 0], GRID)
    s = propagate(psi, split_for(ModelSpec("rabi")), PropagationConfig(1e-3, 2 * math.pi, 100))
    assert s.valid
    np.testing.assert_allclose(s.x_mean[:, 0], math.sqrt(2) * nu * np.cos(s.times), atol=1e-6)
    np.testing.assert_allclose(s.p_mean[:, 0], -math.sqrt(2) * nu * np.sin(s.times), atol=1e-6)
    assert np.all(np.isnan(s.x_mean[:, 1]))


def test_rabi_matches_fock_basis_diagonalisation():
    # independent reference: truncated Fock-space Rabi Hamiltonian
    om, g0, nu, nf = 1.3, 0.4, 1.5, 60
    a = np.diag(np.sqrt(np.arange(1, nf)), 1)
    h = (np.kron(np.eye(2), a.T @ a + 0.5 * np.eye(nf)) + 0.5 * om * np.kron(np.diag([1.0, -1.0]), np.eye(nf))
         + g0 * np.kron(np.array([[0, 1.0], [1.0, 0]]), a + a.T))
    c0 = np.exp(-0.5 * nu**2) * np.array([nu**k / math.sqrt(math.factorial(k)) for k in range(nf)])
    w, v = np.linalg.eigh(h)
    start = v.conj().T @ np.concatenate([c0, np.zeros(nf)])
    psi = compose_initial(coherent_state(nu, GRID), [1, 0], GRID)
    s = propagate(psi, split_for(ModelSpec("rabi", omega=om, g0=g0)), PropagationConfig(5e-4, 8.0, 400))
    ref = []
    for t in s.times:
        amp = v @ (np.exp(-1j * w * t) * start)
        ref.append(np.sum(np.abs(amp[:nf]) ** 2) - np.sum(np.abs(amp[nf:]) ** 2))
    np.testing.assert_allclose(s.inversion, ref, atol=1e-6)


@pytest.mark.parametrize("n", [0, 1, 3, 5])
def test_jc_fock_states_match_oracle(n):
    om, g0 = 1.4, 0.5
    psi = compose_initial(fock_state(n, GRID), [1, 0], GRID)
    s = propagate(psi, split_for(ModelSpec("jc", omega=om, g0=g0)), PropagationConfig(5e-4, 10.0, 200))
    c = np.zeros(n + 1)
    c[n] = 1
    np.testing.assert_allclose(s.inversion, jc_inversion_exact(c, [1, 0], om, g0, s.times), atol=1e-4)


def test_jc_superposition_and_mixed_atom_match_oracle():
    om, g0 = 0.9, 0.8
    c = np.array([0.5, 0.5j, -0.5, 0.5])
    atom = np.array([0.6, 0.8j])
    psi = compose_initial(fock_superposition(c, GRID), atom, GRID)
    s = propagate(psi, split_for(ModelSpec("jc", omega=om, g0=g0)), PropagationConfig(5e-4, 10.0, 200))
    np.testing.assert_allclose(s.inversion, jc_inversion_exact(c, atom, om, g0, s.times), atol=1e-4)


def test_jc_conserves_excitations():
    psi = compose_initial(coherent_state(2.0, GRID), [1, 0], GRID)
    s = propagate(psi, split_for(ModelSpec("jc", omega=1.5, g0=0.5)), PropagationConfig(5e-4, 10.0, 100))
    assert np.ptp(s.excitations) < 1e-6
    assert s.excitations[0] == pytest.approx(4.0 + 0.5, abs=1e-9)  # n_bar + sigma_z/2


def test_norm_drift_tiny():
    psi = compose_initial(coherent_state(2.0, GRID), [0.6, 0.8], GRID)
    s = propagate(psi, split_for(ModelSpec("rabi", omega=0.5, g0=1.0)), PropagationConfig(1e-3, 10.0, 100))
    assert np.max(np.abs(s.norm - 1)) < 1e-9


def test_energy_error_is_second_order():
    psi = compose_initial(coherent_state(1.5, GRID), [1, 0], GRID)
    split = split_for(ModelSpec("rabi", omega=0.5, g0=1.0))

    def drift(dt):
        s = propagate(psi, split, PropagationConfig(dt, 5.0, int(round(0.05 / dt))))
        return np.max(np.abs(s.energy - s.energy[0]))

    ratio = drift(2e-3) / drift(1e-3)
    assert 3.5 < ratio < 4.5


def test_snapshots_stride_density_and_callback():
    psi = compose_initial(fock_state(0, GRID), [1, 0], GRID)
    seen = []
    s = propagate(psi, split_for(ModelSpec("jc", omega=0.2, g0=2.0)), PropagationConfig(0.01, 1.0, 10),
                  density_every=2, callback=lambda t, a: seen.append(t))
    np.testing.assert_allclose(s.times, np.arange(11) * 0.1, atol=1e-12)
    np.testing.assert_allclose(seen, s.times)
    np.testing.assert_allclose(s.density_times, s.times[::2])
    assert s.density.shape == (6, GRID.n_points)
    np.testing.assert_allclose(s.density.sum(axis=1) * GRID.dx, 1.0, atol=1e-10)


def test_final_partial_stride_lands_on_t_final():
    psi = compose_initial(fock_state(0, GRID), [1, 0], GRID)
    s = propagate(psi, split_for(ModelSpec("rabi", omega=1.0, g0=0.1)), PropagationConfig(0.01, 0.25, 10))
    np.testing.assert_allclose(s.times, [0.0, 0.1, 0.2, 0.25], atol=1e-12)


def test_boundary_leak_flags_series():
    g = make_grid(128, 10.0)
    psi = compose_initial(coherent_state(2.0, g), [1, 0], g)
    s = propagate(psi, split_for(ModelSpec("rabi", omega=0.0, g0=1.5)), PropagationConfig(1e-3, 6.0, 50))
    assert not s.valid
    assert "boundary" in s.abort_reason
    assert s.times[-1] < 6.0


def test_initial_leak_raises():
    g = make_grid(128, 8.0)
    field = np.pi**-0.25 * np.exp(-0.5 * (g.x - 6.0) ** 2)
    psi = MultiChannelWavefunction(np.array([field, 0 * field]), g)
    with pytest.raises(NumericalAbort):
        propagate(psi, split_for(ModelSpec("rabi")), PropagationConfig(1e-3, 1.0))


def test_non_finite_amplitudes_flag_series():
    amps = compose_initial(fock_state(0, GRID), [1, 0], GRID).channels.copy()
    amps[0, GRID.n_points // 2] = np.nan
    s = propagate(MultiChannelWavefunction(amps, GRID), split_for(ModelSpec("rabi")), PropagationConfig(0.1, 1.0))
    assert not s.valid and "non-finite" in s.abort_reason
    assert len(s) == 0


def test_propagation_requires_bare_basis():
    psi = compose_initial(fock_state(0, GRID), [1, 0], GRID, basis_tag="rotated")
    with pytest.raises(ValueError):
        propagate(psi, split_for(ModelSpec("rabi")), PropagationConfig(0.1, 1.0))
