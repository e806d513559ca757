"""Measurements on wave packets and collapse-revival post-processing."""
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .grid import to_momentum
from .models import DIABATIC_ROTATION

#: populations below this leave a channel centroid undefined (NaN)
EMPTY_CHANNEL = 1e-12


def _require_bare(psi):
    if psi.basis_tag != "bare":
        raise ValueError(
            f"inversion needs the bare basis, state is in the {psi.basis_tag!r} basis;"
            " transform it first"
        )


def density(psi):
    """P(x) = sum_c |psi_c(x)|^2."""
    psi = psi.to_position()
    return np.sum(np.abs(psi.channels) ** 2, axis=0)


def inversion(psi):
    """<sigma_z> = int |psi_+|^2 - |psi_-|^2 dx for a bare two-channel state."""
    _require_bare(psi)
    if psi.n_channels != 2:
        raise ValueError("inversion is defined for two-level states")
    pops = psi.populations()
    return float(pops[0] - pops[1])


def channel_centroids(psi):
    """Per-channel (<x>_c, <p>_c, population_c).

    Centroids are conditioned on the channel; an (almost) empty channel gets
    NaN instead of a number. Momenta are taken in the momentum representation.
    """
    psi_x = psi.to_position()
    grid = psi.grid
    mx = _kernels.channel_moments(np.ascontiguousarray(psi_x.channels), grid.x)
    phi = to_momentum(psi_x.channels, grid)
    mp = _kernels.channel_moments(np.ascontiguousarray(phi), grid.p)
    pops = mx[:, 0] * grid.dx
    with np.errstate(invalid="ignore", divide="ignore"):
        xm = np.where(pops > EMPTY_CHANNEL, mx[:, 1] / mx[:, 0], np.nan)
        pm = np.where(pops > EMPTY_CHANNEL, mp[:, 1] / mp[:, 0], np.nan)
    return xm, pm, pops


def energy(psi, split):
    return Measurer(psi.grid, split).measure(psi.to_position().channels)["energy"]


def excitation_number(psi):
    """<a^dagger a + sigma_z/2> for a bare two-channel state."""
    _require_bare(psi)
    grid = psi.grid
    amps = psi.to_position().channels
    phi = to_momentum(amps, grid)
    x2 = np.sum(np.abs(amps) ** 2 * grid.x**2) * grid.dx
    p2 = np.sum(np.abs(phi) ** 2 * grid.p**2) * grid.dp
    return float(0.5 * (x2 + p2) - 0.5 + 0.5 * inversion(psi))


class Measurer:
    """Evaluates every per-snapshot observable from raw x-space amplitudes.

    Precomputes the Hamiltonian blocks on the lattice so the propagator can
    call ``measure`` cheaply at each snapshot. ``centroid_basis='rotated'``
    takes the channel centroids in the diabatic basis |u>, |d> instead of
    the bare one; populations and inversion always stay bare.
    """

    def __init__(self, grid, split, centroid_basis="bare"):
        self.grid = grid
        self.split = split
        self.kind = split.model.kind
        if centroid_basis == "bare":
            self.rot = None
        elif centroid_basis == "rotated":
            if split.n_channels != 2:
                raise ValueError("the rotated basis is defined for two-channel models")
            self.rot = DIABATIC_ROTATION
        else:
            raise ValueError(f"centroid basis must be 'bare' or 'rotated', not {centroid_basis!r}")
        self.centroid_basis = centroid_basis
        self.hx = np.ascontiguousarray(np.moveaxis(split.x_block(grid.x), 0, -1))
        self.hp = np.ascontiguousarray(np.moveaxis(split.p_block(grid.p), 0, -1))
        self._p2 = grid.p**2
        self._x2 = grid.x**2
        self._scale_p = (grid.dx / np.sqrt(2.0 * np.pi)) ** 2  # |phi|^2 from |fft|^2

    def measure(self, amps):
        grid = self.grid
        dx, dp = grid.dx, grid.dp
        f = sfft.fft(amps, axis=-1)
        mx = _kernels.channel_moments(amps, grid.x)
        mp = _kernels.channel_moments(f, grid.p)
        pops = mx[:, 0] * dx
        if self.rot is not None:
            # the rotation is constant, so it commutes with the FFT
            mx = _kernels.channel_moments(self.rot @ amps, grid.x)
            mp = _kernels.channel_moments(self.rot @ f, grid.p)
        cpops = mx[:, 0] * dx
        with np.errstate(invalid="ignore", divide="ignore"):
            xm = np.where(cpops > EMPTY_CHANNEL, mx[:, 1] / mx[:, 0], np.nan)
            pm = np.where(cpops > EMPTY_CHANNEL, mp[:, 1] / mp[:, 0], np.nan)

        hx_amps = _kernels.apply_pointwise(self.hx, amps, np.empty_like(amps))
        hp_f = _kernels.apply_pointwise(self.hp, f, np.empty_like(f))
        e_x = np.vdot(amps, hx_amps).real * dx
        e_p = np.vdot(f, hp_f).real * self._scale_p * dp
        row = {
            "norm": float(np.sqrt(pops.sum())),
            "populations": pops,
            "x_mean": xm,
            "p_mean": pm,
            "energy": float(e_x + e_p),
            "inversion": np.nan,
            "excitations": np.nan,
        }
        if amps.shape[0] == 2:
            row["inversion"] = float(pops[0] - pops[1])
            if self.kind == "jc":
                dens_x = amps.real**2 + amps.imag**2
                dens_p = f.real**2 + f.imag**2
                x2 = np.sum(dens_x @ self._x2) * dx
                p2 = np.sum(dens_p @ self._p2) * self._scale_p * dp
                row["excitations"] = float(0.5 * (x2 + p2) - 0.5 + 0.5 * row["inversion"])
        return row


@dataclass
class ObservableSeries:
    """Time-indexed record of a propagation run.

    Per-channel arrays have shape (n_snapshots, n_channels); NaN marks an
    undefined centroid (empty channel) or a quantity the model lacks.
    """

    times: np.ndarray
    norm: np.ndarray
    inversion: np.ndarray
    energy: np.ndarray
    populations: np.ndarray
    x_mean: np.ndarray
    p_mean: np.ndarray
    excitations: np.ndarray
    model_kind: str = ""
    centroid_basis: str = "bare"
    density_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    density: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    valid: bool = True
    abort_reason: str = ""

    @classmethod
    def from_rows(cls, times, rows, **kwargs):
        def col(key):
            return np.array([r[key] for r in rows], dtype=float)

        return cls(
            times=np.asarray(times, dtype=float),
            norm=col("norm"),
            inversion=col("inversion"),
            energy=col("energy"),
            populations=np.array([r["populations"] for r in rows], dtype=float),
            x_mean=np.array([r["x_mean"] for r in rows], dtype=float),
            p_mean=np.array([r["p_mean"] for r in rows], dtype=float),
            excitations=col("excitations"),
            **kwargs,
        )

    def __len__(self):
        return len(self.times)

    @property
    def delta_x(self):
        """<x>_0 - <x>_1 in the centroid basis (|+>, |-> when bare)."""
        return self.x_mean[:, 0] - self.x_mean[:, 1]

    @property
    def delta_p(self):
        return self.p_mean[:, 0] - self.p_mean[:, 1]


def inversion_envelope(times, values, window):
    """Sliding max - min of ``values`` over a centred window of ``window``
    time units (clipped at the ends of the series)."""
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise ValueError("series too short for an envelope")
    step = times[1] - times[0]
    half = int(round(0.5 * window / step))
    if half < 1 or 2 * half + 1 > len(times):
        raise ValueError(
            f"envelope window {window} does not fit a series of {len(times)} samples"
            f" spaced {step:g}"
        )
    return _kernels.sliding_range(np.ascontiguousarray(values, dtype=float), half)


@dataclass(frozen=True)
class RevivalEvent:
    time: float
    index: int
    separation: float  # sqrt(dx^2 + dp^2) at the event
    envelope: float  # inversion envelope amplitude at the event


def detect_revivals(series, x_tol, p_tol, envelope_window):
    """Times where both channel packets overlap in phase space.

    A snapshot qualifies when |dx| <= x_tol and |dp| <= p_tol. A single
    occupied channel (undefined centroids) counts as overlapping, so t = 0
    of a product initial state always qualifies. Each contiguous run of
    qualifying snapshots is one event, placed at its smallest
    sqrt(dx^2 + dp^2). Returns (events, envelope array).
    """
    times = np.asarray(series.times, dtype=float)
    dx = np.asarray(series.delta_x, dtype=float)
    dp = np.asarray(series.delta_p, dtype=float)
    envelope = inversion_envelope(times, series.inversion, envelope_window)

    single = np.isnan(dx) & np.isnan(dp)
    dx = np.where(single, 0.0, dx)
    dp = np.where(single, 0.0, dp)
    with np.errstate(invalid="ignore"):
        hit = (np.abs(dx) <= x_tol) & (np.abs(dp) <= p_tol)
    sep = np.hypot(dx, dp)

    events = []
    edges = np.diff(np.concatenate([[0], hit.astype(np.int8), [0]]))
    for start, stop in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)):
        k = start + int(np.argmin(sep[start:stop]))
        events.append(RevivalEvent(float(times[k]), int(k), float(sep[k]), float(envelope[k])))
    return events, envelope


def packet_width(psi):
    """Position standard deviation of the whole packet."""
    x = psi.grid.x
    dens = density(psi) * psi.grid.dx
    mean = np.sum(dens * x)
    return float(np.sqrt(np.sum(dens * (x - mean) ** 2)))
