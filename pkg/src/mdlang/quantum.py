"""Static description of a multilevel gain medium and the deterministic
pieces of its density-matrix equations of motion.

Level energies, dipole moments, resonant-tunneling couplings and
incoherent scattering/dephasing rates are collected in
:class:`QuantumSystem`.  The functions below build the field-dependent
Hamiltonian, the dissipator and the macroscopic polarization that couple
the quantum state to the 1D field solver.  All of them broadcast over
leading array dimensions (grid cells, trajectory batches).

Conventions
-----------
* ``scatter[i, j]`` is the scattering rate from level ``j`` to level
  ``i`` (1/s), zero on the diagonal.
* The inverse lifetime of level ``j`` is ``sum_i scatter[i, j]``.
* Density matrices are plain complex ndarrays of shape ``(..., N, N)``
  with ``rho[..., i, j]`` = <i|rho|j>.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import hbar


class ConfigError(ValueError):
    """Raised when a quantum-system description violates its invariants."""


def dephasing_rate(tau_i: float, tau_j: float, gamma_p: float) -> float:
    """Total dephasing rate of the (i, j) coherence.

    ``0.5 * (1/tau_i + 1/tau_j) + gamma_p``; infinite lifetimes are the
    explicit no-decay marker and contribute nothing.
    """
    for tau in (tau_i, tau_j):
        if not np.isinf(tau) and tau <= 0:
            raise ConfigError(f"lifetime must be positive or inf, got {tau}")
    if gamma_p < 0:
        raise ConfigError(f"pure dephasing rate must be >= 0, got {gamma_p}")
    return 0.5 * (1.0 / tau_i + 1.0 / tau_j) + gamma_p


def _check_symmetric_real(name: str, m: np.ndarray) -> None:
    if np.iscomplexobj(m) and np.abs(m.imag).max(initial=0.0) != 0.0:
        raise ConfigError(f"{name} must be real (complex phases are rejected)")
    if not np.allclose(m, m.T, atol=0.0, rtol=0.0):
        raise ConfigError(f"{name} must be symmetric")
    if np.abs(np.diagonal(m)).max(initial=0.0) != 0.0:
        raise ConfigError(f"{name} must have a zero diagonal")


@dataclass(frozen=True)
class QuantumSystem:
    """Immutable N-level gain-medium description (SI units throughout)."""

    energies: np.ndarray          # (N,) J, stored relative to the lowest level
    dipole: np.ndarray            # (N, N) C m, real symmetric, zero diagonal
    tunneling: np.ndarray         # (N, N) rad/s, real symmetric, zero diagonal
    scatter: np.ndarray           # (N, N) 1/s, scatter[i, j]: j -> i
    dephasing_p: np.ndarray       # (N, N) 1/s pure dephasing, symmetric
    carrier_density: float        # 1/m^3
    period_length: float = 0.0    # m (one quantum-system period)
    level_names: tuple = ()

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.ndim != 1 or e.size < 2:
            raise ConfigError("need at least two levels")
        n = e.size
        object.__setattr__(self, "energies", e - e.min())
        for name in ("dipole", "tunneling", "scatter", "dephasing_p"):
            m = np.asarray(getattr(self, name))
            if np.iscomplexobj(m):
                if np.abs(m.imag).max(initial=0.0) != 0.0:
                    raise ConfigError(f"{name} must be real (complex phases "
                                      "are rejected)")
                m = m.real
            m = m.astype(float)
            if m.shape != (n, n):
                raise ConfigError(f"{name} must be {n}x{n}, got {m.shape}")
            object.__setattr__(self, name, m)
        _check_symmetric_real("dipole", self.dipole)
        _check_symmetric_real("tunneling", self.tunneling)
        _check_symmetric_real("dephasing_p", self.dephasing_p)
        if self.scatter.min() < 0 or self.dephasing_p.min() < 0:
            raise ConfigError("rates must be nonnegative")
        if np.abs(np.diagonal(self.scatter)).max() != 0.0:
            raise ConfigError("scatter must have a zero diagonal")
        if self.carrier_density <= 0:
            raise ConfigError("carrier_density must be positive")
        if not self.level_names:
            object.__setattr__(self, "level_names",
                               tuple(str(i) for i in range(n)))

    @property
    def num_levels(self) -> int:
        return self.energies.size

    @property
    def inverse_lifetimes(self) -> np.ndarray:
        """1/tau_j = sum_i scatter[i, j], shape (N,)."""
        return self.scatter.sum(axis=0)

    @property
    def gamma(self) -> np.ndarray:
        """Total dephasing-rate matrix (N, N); diagonal is zero."""
        inv_tau = self.inverse_lifetimes
        g = 0.5 * (inv_tau[:, None] + inv_tau[None, :]) + self.dephasing_p
        np.fill_diagonal(g, 0.0)
        return g

    @property
    def bare_hamiltonian(self) -> np.ndarray:
        """Field-free part diag(eps) - hbar * tunneling, shape (N, N), J."""
        return np.diag(self.energies) - hbar * self.tunneling

    def rate_generator(self) -> np.ndarray:
        """Population rate matrix R with R[i, j] = scatter[i, j] (i != j)
        and R[j, j] = -1/tau_j.  Columns sum to zero exactly."""
        r = self.scatter.astype(float).copy()
        np.fill_diagonal(r, 0.0)
        np.fill_diagonal(r, -r.sum(axis=0))
        return r


def hamiltonian(system: QuantumSystem, e_field) -> np.ndarray:
    """H(E) = diag(eps) - hbar*tunneling - dipole*E_z, Hermitian, in J.

    ``e_field`` may carry leading batch/cell dimensions.
    """
    e_field = np.asarray(e_field, dtype=float)
    if not np.all(np.isfinite(e_field)):
        raise ValueError("e_field must be finite")
    h0 = system.bare_hamiltonian
    return h0 - system.dipole * e_field[..., None, None]


def dissipator(system: QuantumSystem, rho: np.ndarray) -> np.ndarray:
    """Incoherent part of d(rho)/dt: rate in/out terms on the diagonal,
    -gamma_ij * rho_ij off the diagonal.  Trace-free by construction."""
    rho = np.asarray(rho)
    out = -system.gamma * rho
    pops = np.einsum("...ii->...i", rho)
    gain = np.einsum("ij,...j->...i", system.scatter, pops)
    loss = system.inverse_lifetimes * pops
    idx = np.arange(system.num_levels)
    out[..., idx, idx] = gain - loss
    return out


def polarization(system: QuantumSystem, rho: np.ndarray) -> np.ndarray:
    """Macroscopic polarization n_3D * trace(mu rho) in C/m^2 (real)."""
    return system.carrier_density * np.einsum(
        "ij,...ji->...", system.dipole, rho).real


def hermitize(rho: np.ndarray) -> np.ndarray:
    """(rho + rho^dagger)/2; makes Hermiticity exact in floating point."""
    return 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))


def trace_error(rho: np.ndarray) -> np.ndarray:
    """|trace(rho) - 1| with leading dims preserved."""
    return np.abs(np.einsum("...ii->...", rho) - 1.0)


def min_eigenvalue(rho: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of Hermitian rho (closed form for N=2)."""
    n = rho.shape[-1]
    if n == 2:
        a = rho[..., 0, 0].real
        d = rho[..., 1, 1].real
        off = np.abs(rho[..., 0, 1])
        disc = np.sqrt(0.25 * (a - d) ** 2 + off**2)
        return 0.5 * (a + d) - disc
    return np.linalg.eigvalsh(rho)[..., 0]


def random_density(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-rank density matrix G G^dagger / trace(G G^dagger)."""
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m = g @ g.conj().T
    return m / np.trace(m).real
