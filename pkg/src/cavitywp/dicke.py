"""Dicke model: collective adiabatic potentials, Holstein-Primakoff expansion
and normal modes of the resulting quadratic boson Hamiltonian.

The collective potential matrix is the N-atom Rabi form
(Omega/2) S_z + sqrt(2) (g0/sqrt N) x S_x with S_k = sum_i sigma_k^(i), so
N = 1 is exactly the single-atom Rabi model and the lowest curve turns into
a double well at g0 = sqrt(Omega)/2. ``convention="plain"`` drops the
sqrt(2) from the coupling instead.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

CONVENTIONS = {"rabi": 2.0, "plain": 1.0}


def _coupling_sq_factor(convention):
    try:
        return CONVENTIONS[convention]
    except KeyError:
        raise ValueError(f"unknown convention {convention!r}; use one of {list(CONVENTIONS)}")


def spin_labels(n_atoms):
    """Eigenvalues of S_z = sum sigma_z on the symmetric subspace: -N, -N+2, ..., N."""
    return list(range(-n_atoms, n_atoms + 1, 2))


def dicke_adiabatic_potentials(x, n_atoms, omega, g0, convention="rabi"):
    """{m: V_m(x)} with V_m = x^2/2 + m sqrt(Omega^2/4 + f g0^2 x^2 / N),
    f = 2 ('rabi') or 1 ('plain')."""
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    f = _coupling_sq_factor(convention)
    x = np.asarray(x, dtype=float)
    root = np.sqrt(0.25 * omega**2 + f * g0**2 * x**2 / n_atoms)
    return {m: 0.5 * x**2 + m * root for m in spin_labels(n_atoms)}


def collective_spin(n_atoms):
    """(S_x, S_z) = 2 (J_x, J_z) on the symmetric (j = N/2) subspace,
    ordered by S_z eigenvalue N, N-2, ..., -N."""
    j = 0.5 * n_atoms
    mj = j - np.arange(n_atoms + 1)
    jp = np.zeros((n_atoms + 1, n_atoms + 1))
    for k in range(1, n_atoms + 1):
        jp[k - 1, k] = math.sqrt(j * (j + 1) - mj[k] * (mj[k] + 1))
    return jp + jp.T, np.diag(2.0 * mj)


def dicke_potential_matrix(x, n_atoms, omega, g0, convention="rabi"):
    """x^2/2 + (Omega/2) S_z + sqrt(f) (g0/sqrt N) x S_x on the symmetric subspace."""
    f = _coupling_sq_factor(convention)
    sx, sz = collective_spin(n_atoms)
    x = np.asarray(x, dtype=float)
    c = math.sqrt(f) * g0 / math.sqrt(n_atoms)
    eye = np.eye(n_atoms + 1)
    return (
        (0.5 * x**2)[..., None, None] * eye
        + 0.5 * omega * sz
        + (c * x)[..., None, None] * sx
    )


def critical_coupling(omega):
    if omega < 0:
        raise ValueError("Omega must be non-negative")
    return 0.5 * math.sqrt(omega)


@dataclass(frozen=True)
class DickeGroundState:
    """Product state of N copies of the lower single-atom adiabatic state
    -sin(theta)|+> + cos(theta)|->, i.e. the s = N, m_s = -N Dicke state of
    the x-dependent collective field."""

    theta: float
    n_atoms: int
    s: int
    m_s: int

    @property
    def atom_state(self):
        return np.array([-math.sin(self.theta), math.cos(self.theta)])


def dicke_ground_state(n_atoms, omega, g0, x, convention="rabi"):
    """tan(2 theta) = 2 sqrt(f) g0 x / (sqrt(N) Omega)."""
    f = _coupling_sq_factor(convention)
    theta = 0.5 * math.atan2(2.0 * math.sqrt(f) * g0 * x, math.sqrt(n_atoms) * omega)
    return DickeGroundState(theta, n_atoms, n_atoms, -n_atoms)


def hp_parameters(n_atoms, omega, g0):
    """(mu, alpha_s, beta_s) of the coherent shifts a -> c + alpha_s, b -> d + beta_s.

    mu = 1 up to the critical coupling and (g_c / g0)^2 beyond it;
    alpha_s = g0 sqrt(N (1 - mu^2)), beta_s = sqrt(N (1 - mu) / 2).
    """
    if omega <= 0:
        raise ValueError("Omega must be positive")
    gc = critical_coupling(omega)
    mu = 1.0 if g0 <= gc else (gc / g0) ** 2
    alpha = g0 * math.sqrt(n_atoms * (1.0 - mu**2))
    beta = math.sqrt(0.5 * n_atoms * (1.0 - mu))
    return mu, alpha, beta


def mean_field_energy(alpha, beta, n_atoms, omega, g0):
    """Classical Dicke energy with a -> alpha, b -> beta (both real):
    alpha^2 + Omega (beta^2 - N/2) + (4 g0 / sqrt N) alpha beta sqrt(N - beta^2)."""
    n = n_atoms
    return (
        alpha**2
        + omega * (beta**2 - 0.5 * n)
        + 4.0 * g0 / math.sqrt(n) * alpha * beta * math.sqrt(max(n - beta**2, 0.0))
    )


def mean_field_minimum(n_atoms, omega, g0):
    """Numerically minimise the classical energy over (alpha, beta).

    Independent of the closed forms in ``hp_parameters``; returns
    (|alpha|, beta) at the minimum. Works in the scaled variables
    a = alpha/sqrt N, b = beta/sqrt N where the energy per atom is
    a^2 + Omega (b^2 - 1/2) + 4 g0 a b sqrt(1 - b^2).
    """

    def fun(v):
        a, b = v
        r = math.sqrt(max(1.0 - b * b, 0.0))
        e = a * a + omega * (b * b - 0.5) + 4.0 * g0 * a * b * r
        da = 2.0 * a + 4.0 * g0 * b * r
        db = 2.0 * omega * b + (4.0 * g0 * a * (1.0 - 2.0 * b * b) / r if r > 0 else 0.0)
        return e, np.array([da, db])

    best = None
    for b0 in (0.1, 0.4, 0.65):
        res = minimize(
            fun,
            x0=np.array([-0.5 * g0, b0]),
            jac=True,
            method="L-BFGS-B",
            bounds=[(None, None), (0.0, 0.99)],
            options={"ftol": 1e-16, "gtol": 1e-13, "maxiter": 10_000},
        )
        if best is None or res.fun < best.fun:
            best = res
    a, b = best.x
    root_n = math.sqrt(n_atoms)
    return abs(a) * root_n, b * root_n


@dataclass(frozen=True)
class QuadraticForm:
    """H' = omega_c c^dag c + omega_d d^dag d + kappa_dd (d^dag + d)^2
    + kappa_cd (c^dag + c)(d^dag + d)."""

    omega_c: float
    omega_d: float
    kappa_dd: float
    kappa_cd: float
    mu: float
    alpha: float
    beta: float


def hp_quadratic(n_atoms, omega, g0):
    mu, alpha, beta = hp_parameters(n_atoms, omega, g0)
    return QuadraticForm(
        omega_c=1.0,
        omega_d=omega * (1.0 + mu) / (2.0 * mu),
        kappa_dd=omega * (1.0 - mu) * (3.0 + mu) / (8.0 * mu * (1.0 + mu)),
        kappa_cd=g0 * mu * math.sqrt(2.0 / (1.0 + mu)),
        mu=mu,
        alpha=alpha,
        beta=beta,
    )


class UnstableQuadraticForm(ValueError):
    """The quadratic Hamiltonian has a negative squared normal-mode frequency."""


def quadrature_matrix(q):
    """Symmetric M with H' = z^T M z / 2 + const, z = (X_c, X_d, P_c, P_d),
    where c = (X_c + i P_c)/sqrt 2."""
    m = np.zeros((4, 4))
    m[0, 0] = q.omega_c
    m[1, 1] = q.omega_d + 4.0 * q.kappa_dd
    m[0, 1] = m[1, 0] = 2.0 * q.kappa_cd
    m[2, 2] = q.omega_c
    m[3, 3] = q.omega_d
    return m


def normal_modes(q, rtol=1e-12):
    """(eps_minus, eps_plus) from the eigenvalues +-i eps of J M.

    Squared frequencies that are negative beyond round-off raise
    ``UnstableQuadraticForm``.
    """
    m = quadrature_matrix(q)
    j = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
    lam = np.linalg.eigvals(j @ m)
    eps_sq = np.sort((-(lam**2)).real)[::2]  # eigenvalues come in +- pairs
    scale = float(np.max(np.abs(m)))
    if eps_sq[0] < -rtol * scale**2:
        raise UnstableQuadraticForm(
            f"quadratic form is dynamically unstable (eps^2 = {eps_sq[0]:.3e})"
        )
    eps = np.sqrt(np.clip(eps_sq, 0.0, None))
    return float(eps[0]), float(eps[1])


def normal_phase_frequencies(omega, g0):
    """Closed form for mu = 1:
    eps^2 = (1 + Omega^2)/2 -+ sqrt((1 - Omega^2)^2 + 16 g0^2 Omega)/2."""
    root = math.sqrt((1.0 - omega**2) ** 2 + 16.0 * g0**2 * omega)
    lo = 0.5 * (1.0 + omega**2 - root)
    hi = 0.5 * (1.0 + omega**2 + root)
    return math.sqrt(max(lo, 0.0)), math.sqrt(hi)
