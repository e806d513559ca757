"""Field states on the lattice and multi-channel (atom x field) wave packets."""
from dataclasses import dataclass, replace

import numpy as np

from .grid import to_momentum, to_position

BASIS_TAGS = ("bare", "rotated", "adiabatic")
BOUNDARY_TOLERANCE = 1e-8


@dataclass
class MultiChannelWavefunction:
    """Amplitudes of shape (n_channels, n_points) on ``grid``.

    In the bare basis channel 0 is |+> and channel 1 is |->; the Lambda atom
    uses (g1, e, g2). ``space`` says whether the samples are over x or p.
    """

    channels: np.ndarray
    grid: object
    basis_tag: str = "bare"
    space: str = "x"

    def __post_init__(self):
        self.channels = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        if self.channels.shape[1] != self.grid.n_points:
            raise ValueError("channel length does not match the grid")
        if self.basis_tag not in BASIS_TAGS:
            raise ValueError(f"unknown basis tag {self.basis_tag!r}")
        if self.space not in ("x", "p"):
            raise ValueError(f"space must be 'x' or 'p', got {self.space!r}")

    @property
    def n_channels(self):
        return self.channels.shape[0]

    @property
    def measure(self):
        return self.grid.dx if self.space == "x" else self.grid.dp

    def populations(self):
        return np.sum(np.abs(self.channels) ** 2, axis=1) * self.measure

    def norm(self):
        return float(np.sqrt(self.populations().sum()))

    def to_momentum(self):
        if self.space == "p":
            return self
        return replace(self, channels=to_momentum(self.channels, self.grid), space="p")

    def to_position(self):
        if self.space == "x":
            return self
        return replace(self, channels=to_position(self.channels, self.grid), space="x")

    def copy(self):
        return replace(self, channels=self.channels.copy())


def boundary_amplitude(amps):
    """Largest |amplitude| on the two outermost lattice points."""
    amps = np.atleast_2d(amps)
    return float(max(np.abs(amps[:, 0]).max(), np.abs(amps[:, -1]).max()))


def _require_resolved(amps, what, tol=BOUNDARY_TOLERANCE):
    edge = boundary_amplitude(amps)
    if edge > tol:
        raise ValueError(
            f"{what} is not resolved on the grid: boundary amplitude {edge:.3e} > {tol:g}"
            " (increase x_max)"
        )


def hermite_functions(n_max, x):
    """Normalised oscillator eigenfunctions psi_0..psi_{n_max} at points x.

    Uses the recurrence
    psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1},
    which never forms the raw Hermite polynomials and so stays finite for
    large n. Returns an array of shape (n_max + 1, len(x)).
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = np.pi**-0.25 * np.exp(-0.5 * x**2)
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, n_max):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def fock_state(n, grid):
    if int(n) != n or n < 0:
        raise ValueError(f"Fock index must be a non-negative integer, got {n!r}")
    psi = hermite_functions(int(n), grid.x)[-1].astype(complex)
    _require_resolved(psi, f"Fock state n={n}")
    return psi


def coherent_state(nu, grid):
    """Coherent state |nu> in the x representation.

    pi^(-1/4) exp(-(Im nu)^2) exp(-(x - sqrt(2) nu)^2 / 2) evaluated with
    complex nu. The complex square carries the momentum phase
    exp(i sqrt(2) Im(nu) x), so <x> = sqrt(2) Re nu and <p> = sqrt(2) Im nu.
    This equals the textbook form exp(-|nu|^2/2) sum nu^n/sqrt(n!) |n> times
    the global phase exp(-i Re(nu) Im(nu)).
    """
    nu = complex(nu)
    psi = np.pi**-0.25 * np.exp(-nu.imag**2 - 0.5 * (grid.x - np.sqrt(2.0) * nu) ** 2)
    _require_resolved(psi, f"coherent state nu={nu}")
    return psi


def fock_superposition(coefficients, grid):
    coefficients = np.asarray(coefficients, dtype=complex)
    basis = hermite_functions(len(coefficients) - 1, grid.x)
    psi = coefficients @ basis
    _require_resolved(psi, "Fock superposition")
    return psi


def fock_coefficients(field, grid, n_max):
    """Project a field amplitude array onto psi_0..psi_{n_max}."""
    basis = hermite_functions(n_max, grid.x)
    return basis @ np.asarray(field, dtype=complex) * grid.dx


def compose_initial(field, atomic, grid, basis_tag="bare"):
    """Product state: channel c = atomic[c] * field."""
    field = np.asarray(field, dtype=complex)
    atomic = np.asarray(atomic, dtype=complex).ravel()
    if field.shape != (grid.n_points,):
        raise ValueError("field array does not match the grid")
    if abs(np.linalg.norm(atomic) - 1.0) > 1e-10:
        raise ValueError(f"atomic vector must have unit norm, got {np.linalg.norm(atomic)}")
    field_norm = np.sqrt(np.sum(np.abs(field) ** 2) * grid.dx)
    if abs(field_norm - 1.0) > 1e-8:
        raise ValueError(f"field state is not normalised (norm {field_norm})")
    return MultiChannelWavefunction(atomic[:, None] * field[None, :], grid, basis_tag)


def check_channel_count(psi, n_channels):
    if psi.n_channels != n_channels:
        raise ValueError(
            f"state has {psi.n_channels} channels, model needs {n_channels}"
        )
