"""Potential matrices of the cavity QED models in the quadrature representation.

Every builder is vectorised: pass a scalar x to get a (C, C) matrix, or an
array of shape (n,) to get (n, C, C). Channel order is (|+>, |->) with
sigma_z = diag(1, -1); the Lambda atom uses (g1, e, g2).
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)

# U = (sigma_x + sigma_z)/sqrt(2); Hermitian and its own inverse.
DIABATIC_ROTATION = (SIGMA_X + SIGMA_Z) / np.sqrt(2.0)

KINDS = ("rabi", "jc", "lambda", "dicke")
N_CHANNELS = {"rabi": 2, "jc": 2, "lambda": 3}


@dataclass(frozen=True)
class ModelSpec:
    """Dimensionless model parameters (energies in units of the field frequency)."""

    kind: str
    omega: float = 0.0
    g0: float = 0.0
    lambda1: float = 0.0
    lambda2: float = 0.0
    n_atoms: int = 1

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        for name in ("omega", "g0", "lambda1", "lambda2"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.omega < 0 or self.g0 < 0:
            raise ValueError("omega and g0 must be non-negative")
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError("n_atoms must be a positive integer")

    @property
    def n_channels(self):
        return N_CHANNELS[self.kind] if self.kind in N_CHANNELS else self.n_atoms + 1

    @property
    def detuning(self):
        return self.omega - 1.0


@dataclass(frozen=True)
class SplitHamiltonian:
    """H = x_block(x) + p_block(p), each block a channel-space matrix field.

    x_block holds x^2/2 and every x-dependent term, p_block holds p^2/2 and
    every p-dependent term, so each is diagonal in its own representation.
    """

    model: ModelSpec
    x_block: Callable
    p_block: Callable

    @property
    def n_channels(self):
        return self.model.n_channels


def _outer(coeff, mat):
    """coeff[..., None, None] * mat, keeping scalar input scalar-shaped."""
    coeff = np.asarray(coeff)
    return coeff[..., None, None] * mat


def _require(spec, kind):
    if spec.kind != kind:
        raise ValueError(f"expected a {kind!r} model, got {spec.kind!r}")


def _kinetic(p, n_channels):
    return _outer(0.5 * np.asarray(p, dtype=float) ** 2, np.eye(n_channels, dtype=complex))


def rabi_split(spec):
    _require(spec, "rabi")
    om, g = spec.omega, spec.g0

    def x_block(x):
        x = np.asarray(x, dtype=float)
        return (
            _outer(0.5 * x**2, IDENTITY2)
            + 0.5 * om * SIGMA_Z
            + _outer(np.sqrt(2.0) * g * x, SIGMA_X)
        )

    return SplitHamiltonian(spec, x_block, lambda p: _kinetic(p, 2))


def jc_split(spec):
    """(g0/sqrt 2)(x sigma_x - p sigma_y) reproduces the (g0/sqrt 2)(x +- ip)
    off-diagonals; the x part goes to x_block and the p part to p_block."""
    _require(spec, "jc")
    om, c = spec.omega, spec.g0 / np.sqrt(2.0)

    def x_block(x):
        x = np.asarray(x, dtype=float)
        return _outer(0.5 * x**2, IDENTITY2) + 0.5 * om * SIGMA_Z + _outer(c * x, SIGMA_X)

    def p_block(p):
        p = np.asarray(p, dtype=float)
        return _outer(0.5 * p**2, IDENTITY2) - _outer(c * p, SIGMA_Y)

    return SplitHamiltonian(spec, x_block, p_block)


def lambda_split(spec):
    _require(spec, "lambda")
    return SplitHamiltonian(spec, lambda x: lambda_potential(spec, x), lambda p: _kinetic(p, 3))


def split_for(spec):
    builders = {"rabi": rabi_split, "jc": jc_split, "lambda": lambda_split}
    if spec.kind not in builders:
        raise ValueError(f"no propagating split for model kind {spec.kind!r}")
    return builders[spec.kind](spec)


# ------------------------------------------------------------ Rabi geometry

def rotated_rabi_potential(spec, x):
    """U x_block(x) U^dagger with U = (sigma_x + sigma_z)/sqrt(2).

    Diagonals are the diabatic curves (x +- sqrt(2) g0)^2/2 - g0^2 (channel 0
    is |u> = (|+>+|->)/sqrt 2, minimum at -sqrt(2) g0); off-diagonal Omega/2.
    """
    _require(spec, "rabi")
    x = np.asarray(x, dtype=float)
    s = np.sqrt(2.0) * spec.g0
    out = np.zeros(x.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = 0.5 * (x + s) ** 2 - spec.g0**2
    out[..., 1, 1] = 0.5 * (x - s) ** 2 - spec.g0**2
    out[..., 0, 1] = out[..., 1, 0] = 0.5 * spec.omega
    return out


def diabatic_potentials(spec, x):
    """(V_d+, V_d-) = (V_h(x + sqrt2 g0), V_h(x - sqrt2 g0)), V_h = x^2/2."""
    x = np.asarray(x, dtype=float)
    s = np.sqrt(2.0) * spec.g0
    return 0.5 * (x + s) ** 2, 0.5 * (x - s) ** 2


def coupling_strength(spec, x):
    """lambda(x) = sqrt(Omega^2/4 + 2 g0^2 x^2)."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(0.25 * spec.omega**2 + 2.0 * spec.g0**2 * x**2)


def adiabatic_angle(spec, x):
    """Mixing angle with tan(2 theta) = 2 sqrt(2) g0 x / Omega.

    Lies in (-pi/4, pi/4); for Omega = 0 it is sign(x) pi/4 (0 at x = 0).
    For Omega > 0 this branch is already continuous in x.
    """
    x = np.asarray(x, dtype=float)
    if spec.omega == 0:
        return 0.25 * np.pi * np.sign(x)
    return 0.5 * np.arctan2(2.0 * np.sqrt(2.0) * spec.g0 * x, spec.omega)


def adiabatic_angle_on_lattice(spec, x):
    """theta over an ordered lattice, unwrapped so consecutive points never
    jump by a multiple of pi/2."""
    theta = adiabatic_angle(spec, x)
    return 0.25 * np.unwrap(4.0 * theta)


def adiabatic_transform(spec, x):
    """Return (theta, U1) where the columns of U1 are |up> = cos|+> + sin|->
    and |down> = -sin|+> + cos|->, so U1^dagger V U1 = diag(V+ lambda, V - lambda)."""
    _require(spec, "rabi")
    theta = adiabatic_angle(spec, x)
    c, s = np.cos(theta), np.sin(theta)
    u1 = np.empty(np.shape(theta) + (2, 2), dtype=complex)
    u1[..., 0, 0] = c
    u1[..., 0, 1] = -s
    u1[..., 1, 0] = s
    u1[..., 1, 1] = c
    return theta, u1


def adiabatic_corrections(spec, x):
    """Closed-form d(theta)/dx and d^2(theta)/dx^2.

    d theta = sqrt(2) Omega g0 / (Omega^2 + 8 g0^2 x^2)
    d2 theta = -16 sqrt(2) Omega g0^3 x / (Omega^2 + 8 g0^2 x^2)^2
    """
    _require(spec, "rabi")
    if spec.omega <= 0:
        raise ValueError("adiabatic corrections are singular at Omega = 0 (delta-like at x = 0)")
    x = np.asarray(x, dtype=float)
    om, g = spec.omega, spec.g0
    den = om**2 + 8.0 * g**2 * x**2
    d1 = np.sqrt(2.0) * om * g / den
    d2 = -16.0 * np.sqrt(2.0) * om * g**3 * x / den**2
    return d1, d2


def adiabatic_potentials(spec, x):
    """V_ad^+- = x^2/2 + (d theta)^2 +- lambda(x)."""
    d1, _ = adiabatic_corrections(spec, x)
    x = np.asarray(x, dtype=float)
    base = 0.5 * x**2 + d1**2
    lam = coupling_strength(spec, x)
    return base + lam, base - lam


def to_basis(psi, spec, target):
    """Re-express a two-channel Rabi/JC state in another internal basis.

    ``target`` is one of 'bare', 'rotated' (diabatic |u>, |d>) or
    'adiabatic' (pointwise |up>, |down>).
    """
    from .states import MultiChannelWavefunction

    if psi.space != "x":
        psi = psi.to_position()
    bare = _to_bare(psi, spec)
    if target == "bare":
        amps = bare
    elif target == "rotated":
        amps = np.einsum("cd,dj->cj", DIABATIC_ROTATION, bare)
    elif target == "adiabatic":
        _, u1 = adiabatic_transform(spec, psi.grid.x)
        amps = np.einsum("jdc,dj->cj", u1.conj(), bare)
    else:
        raise ValueError(f"unknown basis {target!r}")
    return MultiChannelWavefunction(amps, psi.grid, target)


def _to_bare(psi, spec):
    if psi.basis_tag == "bare":
        return psi.channels
    if psi.basis_tag == "rotated":
        return np.einsum("cd,dj->cj", DIABATIC_ROTATION, psi.channels)
    _, u1 = adiabatic_transform(spec, psi.grid.x)
    return np.einsum("jcd,dj->cj", u1, psi.channels)


# -------------------------------------------------------------- Lambda atom

def lambda_potential(spec, x):
    """x^2/2 I + [[0, l1 x, 0], [l1 x, Omega, l2 x], [0, l2 x, 0]] in (g1, e, g2)."""
    _require(spec, "lambda")
    x = np.asarray(x, dtype=float)
    out = _outer(0.5 * x**2, np.eye(3, dtype=complex))
    out[..., 1, 1] += spec.omega
    out[..., 0, 1] = out[..., 1, 0] = spec.lambda1 * x
    out[..., 1, 2] = out[..., 2, 1] = spec.lambda2 * x
    return out


def lambda_zero(spec):
    return float(np.hypot(spec.lambda1, spec.lambda2))


def lambda_reduce(spec):
    """Return (U3, block) with U3 V(x) U3^T = block(x) (+) spectator.

    Rows of U3 are the bright ground state (l1, 0, l2)/l0, the excited
    state, and the dark ground state (l2, 0, -l1)/l0. ``block(x)`` is the
    active 2x2 matrix x^2/2 I + [[0, l0 x], [l0 x, Omega]]; the spectator
    channel only sees x^2/2.
    """
    _require(spec, "lambda")
    l0 = lambda_zero(spec)
    if l0 == 0:
        raise ValueError("lambda1 = lambda2 = 0: no coupling to reduce")
    l1, l2 = spec.lambda1, spec.lambda2
    u3 = np.array([[l1, 0.0, l2], [0.0, l0, 0.0], [l2, 0.0, -l1]]) / l0

    def block(x):
        x = np.asarray(x, dtype=float)
        out = _outer(0.5 * x**2, IDENTITY2)
        out[..., 1, 1] += spec.omega
        out[..., 0, 1] = out[..., 1, 0] = l0 * x
        return out

    return u3, block


def lambda_adiabatic_potentials(spec, x):
    """(V+, V0, V-) with tan(2 phi) = 2 l0 x / Omega.

    V+- = x^2/2 + (d phi)^2 + Omega/2 +- sqrt(Omega^2/4 + l0^2 x^2),
    V0 = x^2/2 + (d phi)^2 (dark state). The square root carries l0, which
    is what diagonalising the 3x3 potential matrix gives.
    """
    _require(spec, "lambda")
    if spec.omega <= 0:
        raise ValueError("Lambda adiabatic potentials need Omega > 0")
    x = np.asarray(x, dtype=float)
    l0 = lambda_zero(spec)
    om = spec.omega
    dphi = l0 * om / (om**2 + 4.0 * l0**2 * x**2)
    base = 0.5 * x**2 + dphi**2
    root = np.sqrt(0.25 * om**2 + l0**2 * x**2)
    return base + 0.5 * om + root, base, base + 0.5 * om - root
