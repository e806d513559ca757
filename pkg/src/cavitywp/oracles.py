"""Closed-form and Fock-basis references for the wave-packet results."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

UNBOUNDED = math.inf


@dataclass(frozen=True)
class JCEigenpair:
    """Dressed states of the excitation sector n, spanned by |+, n-1> and |-, n>.

    Energies belong to H_JC = a^dagger a + 1/2 + (Omega/2) sigma_z +
    g0 (sigma_+ a + sigma_- a^dagger), i.e. E+- = n +- Omega_n with
    Omega_n = sqrt(Delta^2/4 + g0^2 n). ``vectors`` has the dressed states
    as columns in the (|+, n-1>, |-, n>) basis.
    """

    n: int
    e_plus: float
    e_minus: float
    theta: float
    detuning: float
    vectors: np.ndarray

    @property
    def rabi_frequency(self):
        return 0.5 * (self.e_plus - self.e_minus)


def jc_ground_energy(omega):
    """Energy of the uncoupled sector |-, 0>."""
    return 0.5 - 0.5 * omega


def jc_sector_matrix(n, omega, g0):
    """H_JC restricted to (|+, n-1>, |-, n>)."""
    return np.array(
        [[n - 0.5 + 0.5 * omega, g0 * math.sqrt(n)], [g0 * math.sqrt(n), n + 0.5 - 0.5 * omega]]
    )


def jc_eigensystem(n, omega, g0):
    if n == 0:
        raise ValueError("sector n = 0 is the singlet |-, 0>; use jc_ground_energy")
    if n < 0 or int(n) != n:
        raise ValueError("n must be a positive integer")
    delta = omega - 1.0
    rabi = math.sqrt(0.25 * delta**2 + g0**2 * n)
    theta = 0.5 * math.atan2(2.0 * g0 * math.sqrt(n), delta)
    c, s = math.cos(theta), math.sin(theta)
    vecs = np.array([[c, -s], [s, c]])
    return JCEigenpair(int(n), n + rabi, n - rabi, theta, delta, vecs)


def coherent_fock_coefficients(nu, n_max=None):
    """<n|nu> for n = 0..n_max, matching ``states.coherent_state`` including
    its global phase exp(-i Re(nu) Im(nu)).

    The default cut-off n_bar + 10 sqrt(n_bar) + 20 leaves a Poisson tail
    below 1e-12 for n_bar <= 100.
    """
    nu = complex(nu)
    nbar = abs(nu) ** 2
    if n_max is None:
        n_max = int(math.ceil(nbar + 10.0 * math.sqrt(nbar) + 20))
    n = np.arange(n_max + 1)
    if nu == 0:
        out = np.zeros(n_max + 1, dtype=complex)
        out[0] = 1.0
        return out
    log_mag = -0.5 * nbar + n * math.log(abs(nu)) - 0.5 * gammaln(n + 1)
    phase = np.exp(1j * n * np.angle(nu) - 1j * nu.real * nu.imag)
    return np.exp(log_mag) * phase


def jc_inversion_exact(coefficients, atomic, omega, g0, t, tol=1e-12):
    """Atomic inversion of sum_n c_n |n> (x) (a+ |+> + a- |->) under H_JC.

    Each excitation sector evolves as an exact 2x2 problem; sectors do not
    interfere in <sigma_z>. ``t`` may be an array. Raises if the Fock
    coefficients miss more than ``tol`` of the probability.
    """
    c = np.asarray(coefficients, dtype=complex)
    a_plus, a_minus = np.asarray(atomic, dtype=complex)
    missing = 1.0 - float(np.sum(np.abs(c) ** 2))
    if missing > tol:
        raise ValueError(
            f"Fock coefficients are truncated too aggressively (missing probability {missing:.2e})"
        )
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n_sectors = len(c)  # sector k couples |+, k-1> and |-, k>, k = 1..len(c)
    k = np.arange(1, n_sectors + 1)
    up = a_plus * c  # amplitude on |+, k-1>
    lo = np.zeros(n_sectors, dtype=complex)
    lo[:-1] = a_minus * c[1:]  # amplitude on |-, k>

    delta = omega - 1.0
    rabi = np.sqrt(0.25 * delta**2 + g0**2 * k)
    cos_t = np.cos(np.outer(t, rabi))
    sinc_t = t[:, None] * np.sinc(np.outer(t, rabi) / np.pi)  # sin(rabi t) / rabi
    hz = 0.5 * delta
    hx = g0 * np.sqrt(k)
    # exp(-i (hz sz + hx sx) t) applied to (up, lo); the common phase drops out
    u_t = cos_t * up - 1j * sinc_t * (hz * up + hx * lo)
    l_t = cos_t * lo - 1j * sinc_t * (hx * up - hz * lo)
    inv = np.sum(np.abs(u_t) ** 2 - np.abs(l_t) ** 2, axis=1)
    # |-, 0> never moves and contributes -|a- c_0|^2
    inv -= abs(a_minus * c[0]) ** 2
    return inv if inv.size > 1 else float(inv[0])


def landau_zener_probability(omega, g0, v):
    """P_LZ = 1 - exp(-sqrt(2) pi Omega^2 / (8 g0 v)).

    The probability of following the adiabatic curve through the crossing,
    which is the population transferred between the two diabatic states.
    """
    if v <= 0:
        raise ValueError("crossing velocity must be positive")
    if g0 <= 0:
        raise ValueError("g0 must be positive")
    return float(-np.expm1(-math.sqrt(2.0) * math.pi * omega**2 / (8.0 * g0 * v)))


def crossing_velocity(g0, x_i=None, n_bar=None):
    """Classical estimate of the packet speed at the crossing.

    v = sqrt(x_i^2 - g0^2/2) from an initial mean position, or
    v = sqrt(2 n_bar - g0^2/2) for a coherent state with n_bar photons.
    """
    if (x_i is None) == (n_bar is None):
        raise ValueError("give exactly one of x_i or n_bar")
    radicand = (x_i**2 if x_i is not None else 2.0 * n_bar) - 0.5 * g0**2
    if radicand <= 0:
        what = f"x_i = {x_i}" if x_i is not None else f"n_bar = {n_bar}"
        raise ValueError(
            f"{what} does not reach the crossing: need x_i^2 > g0^2/2 (2 n_bar > g0^2/2)"
        )
    return math.sqrt(radicand)


def diabatic_crossing_speed(g0, displacement):
    """Exact classical speed at x = 0 for a packet released at rest on a Rabi
    diabatic curve, ``displacement`` away from that curve's minimum.

    Energy conservation on (x -+ sqrt(2) g0)^2/2 - g0^2 gives
    v = sqrt(displacement^2 - 2 g0^2).
    """
    radicand = displacement**2 - 2.0 * g0**2
    if radicand <= 0:
        raise ValueError(
            f"displacement {displacement} does not reach the crossing (need > sqrt(2) g0)"
        )
    return math.sqrt(radicand)


def _fd_derivatives(energy, n0):
    e = {k: float(energy(n0 + k)) for k in (-2, -1, 0, 1, 2)}
    d1 = 0.5 * (e[1] - e[-1])
    d2 = e[1] - 2.0 * e[0] + e[-1]
    d3 = 0.5 * (e[2] - 2.0 * e[1] + 2.0 * e[-1] - e[-2])
    return d1, d2, d3


def time_scales(energy, n0, floor=1e-13):
    """(T_cl, T_rev, T_sup) = 2 pi / |E^(k)(n0)| for k = 1, 2, 3.

    Derivatives are centred unit-step differences in n, exact for
    polynomials up to the stencil order. Derivatives below ``floor`` give
    ``UNBOUNDED``.
    """
    if n0 < 3:
        raise ValueError("n0 must be >= 3 for the difference stencils")
    derivs = _fd_derivatives(energy, n0)
    if not all(np.isfinite(derivs)):
        raise ValueError("energy function is not finite around n0")
    return tuple(UNBOUNDED if abs(d) < floor else 2.0 * math.pi / abs(d) for d in derivs)


def jc_rabi_frequency(n, omega, g0):
    return math.sqrt(0.25 * (omega - 1.0) ** 2 + g0**2 * n)


def jc_revival_time(n_bar, omega, g0):
    """T'_rev = pi / (Omega_{n+1} - Omega_n), with n = n_bar."""
    if n_bar < 1:
        raise ValueError("n_bar must be >= 1")
    if g0 == 0:
        return UNBOUNDED
    gap = jc_rabi_frequency(n_bar + 1, omega, g0) - jc_rabi_frequency(n_bar, omega, g0)
    return math.pi / gap
