"""Uniform position lattice, its conjugate momentum lattice, and the unitary
transform between the two representations."""
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class Grid:
    """Periodic lattice x_j = -x_max + j*dx, j = 0..n_points-1.

    ``p`` is in standard FFT ordering (0, dp, 2dp, ..., -dp), so that
    ``dx * dp * n_points == 2*pi``.
    """

    n_points: int
    x_max: float
    x: np.ndarray = field(init=False, repr=False, compare=False)
    p: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = -self.x_max + self.dx * np.arange(self.n_points)
        p = 2.0 * np.pi * sfft.fftfreq(self.n_points, d=self.dx)
        x.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def dx(self):
        return 2.0 * self.x_max / self.n_points

    @property
    def dp(self):
        return 2.0 * np.pi / (self.n_points * self.dx)

    @property
    def p_max(self):
        return np.pi / self.dx


def make_grid(n_points, x_max):
    if int(n_points) != n_points or n_points < 2:
        raise ValueError(f"n_points must be an integer >= 2, got {n_points!r}")
    if not np.isfinite(x_max) or x_max <= 0:
        raise ValueError(f"x_max must be positive and finite, got {x_max!r}")
    return Grid(int(n_points), float(x_max))


def _check_shape(amps, grid):
    amps = np.asarray(amps)
    if amps.shape[-1] != grid.n_points:
        raise ValueError(
            f"amplitude array has {amps.shape[-1]} points, grid has {grid.n_points}"
        )
    return amps


def to_momentum(amps, grid):
    """Position amplitudes -> momentum amplitudes, channel by channel.

    Amplitudes are continuum-normalised on their own lattice:
    sum |psi|^2 dx == sum |phi|^2 dp. The phase exp(-i p x_0) from the grid
    offset is included, so phi approximates the continuous Fourier transform.
    """
    amps = _check_shape(amps, grid)
    phase = np.exp(-1j * grid.p * grid.x[0])
    return (grid.dx / np.sqrt(2.0 * np.pi)) * phase * sfft.fft(amps, axis=-1)


def to_position(amps_p, grid):
    amps_p = _check_shape(amps_p, grid)
    phase = np.exp(1j * grid.p * grid.x[0])
    return (np.sqrt(2.0 * np.pi) / grid.dx) * sfft.ifft(phase * amps_p, axis=-1)
