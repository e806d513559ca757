"""Second-order Strang split-operator propagation of multi-channel packets.

One step is U_x(dt/2) F^-1 U_p(dt) F U_x(dt/2), where U_x and U_p are the
exact pointwise exponentials of the x- and p-blocks of a SplitHamiltonian.
"""
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .observables import Measurer, ObservableSeries
from .states import MultiChannelWavefunction, boundary_amplitude, check_channel_count


@dataclass(frozen=True)
class PropagationConfig:
    dt: float
    t_final: float
    snapshot_stride: int = 1
    boundary_tolerance: float = 1e-8

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not self.t_final > self.dt:
            raise ValueError("t_final must exceed dt")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be a positive integer")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))


def _check_hermitian(h):
    h = np.asarray(h)
    scale = max(1.0, float(np.max(np.abs(h))))
    err = float(np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2)))))
    if err > 1e-12 * scale:
        raise ValueError(f"matrix is not Hermitian (max |H - H^dagger| = {err:.3e})")


def expm_channel(h, dt):
    """exp(-i H dt) for Hermitian H of shape (..., C, C).

    2x2 uses H = a0 I + a.sigma: exp(-i H dt) = e^{-i a0 dt}
    (cos(|a| dt) I - i sin(|a| dt) a.sigma / |a|). Larger matrices go
    through a Hermitian eigendecomposition.
    """
    h = np.asarray(h, dtype=complex)
    _check_hermitian(h)
    if h.shape[-1] == 2:
        a0 = 0.5 * (h[..., 0, 0] + h[..., 1, 1]).real
        az = 0.5 * (h[..., 0, 0] - h[..., 1, 1]).real
        ax = h[..., 0, 1].real
        ay = -h[..., 0, 1].imag
        r = np.sqrt(ax**2 + ay**2 + az**2)
        c = np.cos(r * dt)
        # sin(r dt)/r, finite as r -> 0
        s = dt * np.sinc(r * dt / np.pi)
        ph = np.exp(-1j * a0 * dt)
        out = np.empty(h.shape, dtype=complex)
        out[..., 0, 0] = ph * (c - 1j * s * az)
        out[..., 1, 1] = ph * (c + 1j * s * az)
        out[..., 0, 1] = ph * (-1j * s * (ax - 1j * ay))
        out[..., 1, 0] = ph * (-1j * s * (ax + 1j * ay))
        return out
    w, v = np.linalg.eigh(h)
    return np.einsum("...ik,...k,...jk->...ij", v, np.exp(-1j * w * dt), v.conj())


def _pointwise(mats):
    """(n, C, C) -> contiguous (C, C, n) layout used by the kernels."""
    return np.ascontiguousarray(np.moveaxis(mats, 0, -1))


class SplitOperatorPropagator:
    """Precomputed Strang step for one (split, grid, dt).

    Works on raw x-space amplitude arrays of shape (C, n). Consecutive
    half-steps in x are fused, so ``advance(amps, k)`` costs k FFT pairs
    and k + 1 pointwise products.
    """

    def __init__(self, split, grid, dt):
        self.split = split
        self.grid = grid
        self.dt = dt
        hx = split.x_block(grid.x)
        hp = split.p_block(grid.p)
        self.ux_half = _pointwise(expm_channel(hx, 0.5 * dt))
        self.ux_full = _pointwise(expm_channel(hx, dt))
        self.up = _pointwise(expm_channel(hp, dt))

    def advance(self, amps, n_steps):
        if n_steps <= 0:
            return amps
        apply = _kernels.apply_pointwise
        amps = np.ascontiguousarray(amps, dtype=complex)
        apply(self.ux_half, amps, amps)
        for k in range(n_steps):
            f = sfft.fft(amps, axis=-1, overwrite_x=True)
            apply(self.up, f, f)
            amps = sfft.ifft(f, axis=-1, overwrite_x=True)
            apply(self.ux_full if k < n_steps - 1 else self.ux_half, amps, amps)
        return amps


def strang_step(psi, split, dt):
    """One Strang step of a MultiChannelWavefunction (builds the exponentials
    each call; use SplitOperatorPropagator for repeated steps)."""
    check_channel_count(psi, split.n_channels)
    psi = psi.to_position()
    prop = SplitOperatorPropagator(split, psi.grid, dt)
    amps = prop.advance(psi.channels.copy(), 1)
    return MultiChannelWavefunction(amps, psi.grid, psi.basis_tag)


class NumericalAbort(RuntimeError):
    """Boundary leak or non-finite amplitudes during propagation."""


def _edge_report(amps, grid, tol):
    edge = boundary_amplitude(amps)
    if edge > tol:
        return f"boundary amplitude {edge:.3e} exceeds tolerance {tol:g}"
    f = sfft.fft(amps, axis=-1) * (grid.dx / np.sqrt(2.0 * np.pi))
    k_edge = grid.n_points // 2
    edge_p = float(np.abs(f[:, k_edge - 1 : k_edge + 1]).max())
    if edge_p > tol:
        return f"momentum-lattice edge amplitude {edge_p:.3e} exceeds tolerance {tol:g}"
    return ""


def propagate(psi0, split, config, density_every=0, callback=None, centroid_basis="bare"):
    """Propagate ``psi0`` and record observables every ``snapshot_stride`` steps.

    ``density_every`` > 0 also stores P(x, t) at every that-many snapshots.
    ``callback(t, amps)`` is called at each snapshot with the raw x-space
    amplitudes. A boundary leak or non-finite amplitude stops the run; the
    partial series is returned with ``valid = False``. ``centroid_basis``
    is passed to ``Measurer``.
    """
    check_channel_count(psi0, split.n_channels)
    if psi0.basis_tag != "bare":
        raise ValueError("propagation runs in the bare basis")
    grid = psi0.grid
    amps = np.ascontiguousarray(psi0.to_position().channels, dtype=complex).copy()
    reason = _edge_report(amps, grid, config.boundary_tolerance)
    if reason:
        raise NumericalAbort(f"initial state: {reason}")

    prop = SplitOperatorPropagator(split, grid, config.dt)
    measurer = Measurer(grid, split, centroid_basis)
    n_steps = config.n_steps
    stride = int(config.snapshot_stride)

    times, rows, dens_t, dens = [], [], [], []
    step = 0
    valid, abort = True, ""
    while True:
        t = step * config.dt
        if not np.all(np.isfinite(amps)):
            valid, abort = False, f"non-finite amplitude at t = {t:.6g}"
            break
        reason = _edge_report(amps, grid, config.boundary_tolerance)
        if reason:
            valid, abort = False, f"{reason} at t = {t:.6g}"
            break
        times.append(t)
        rows.append(measurer.measure(amps))
        if density_every and (len(times) - 1) % density_every == 0:
            dens_t.append(t)
            dens.append(np.sum(amps.real**2 + amps.imag**2, axis=0))
        if callback is not None:
            callback(t, amps)
        if step >= n_steps:
            break
        k = min(stride, n_steps - step)
        amps = prop.advance(amps, k)
        step += k

    return ObservableSeries.from_rows(
        times,
        rows,
        model_kind=split.model.kind,
        centroid_basis=centroid_basis,
        density_times=np.asarray(dens_t, dtype=float),
        density=np.asarray(dens) if dens else np.empty((0, grid.n_points)),
        valid=valid,
        abort_reason=abort,
    )
