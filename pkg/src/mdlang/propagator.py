"""Per-cell density-matrix propagation: symmetric splitting of the
coherent commutator, the incoherent relaxation and the stochastic kick.

One full step advances rho by

    half relaxation -> unitary Cayley step with the local field
    -> half relaxation -> fluctuation kick (sqrt(dt) * F)

The Cayley transform U = (1 + i H dt/2hbar)^(-1) (1 - i H dt/2hbar) is
exactly unitary for Hermitian H, so trace and spectrum survive the
coherent step; the relaxation half-steps use the exact exponential of
the population rate matrix (trace preserving, positivity preserving)
and elementwise coherence decay.  The kick is Ito: amplitudes are
evaluated at the pre-kick state.

Everything broadcasts over leading (batch, cell) dimensions.
"""

from __future__ import annotations

import numpy as np
from scipy.constants import hbar
from scipy.linalg import expm

from . import kernels
from .noise import (
    NoiseModel,
    ThreeLevelCoeffs,
    full_fluctuation_vector,
    reduced_fluctuations,
    slots_for,
)
from .quantum import ConfigError, QuantumSystem, hermitize, polarization


def _inverse_2x2(m: np.ndarray) -> np.ndarray:
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out / det[..., None, None]


def _inverse_3x3(m: np.ndarray) -> np.ndarray:
    a, b, c = m[..., 0, 0], m[..., 0, 1], m[..., 0, 2]
    d, e, f = m[..., 1, 0], m[..., 1, 1], m[..., 1, 2]
    g, h, i = m[..., 2, 0], m[..., 2, 1], m[..., 2, 2]
    co00 = e * i - f * h
    co01 = c * h - b * i
    co02 = b * f - c * e
    co10 = f * g - d * i
    co11 = a * i - c * g
    co12 = c * d - a * f
    co20 = d * h - e * g
    co21 = b * g - a * h
    co22 = a * e - b * d
    det = a * co00 + b * co10 + c * co20
    out = np.empty_like(m)
    out[..., 0, 0], out[..., 0, 1], out[..., 0, 2] = co00, co01, co02
    out[..., 1, 0], out[..., 1, 1], out[..., 1, 2] = co10, co11, co12
    out[..., 2, 0], out[..., 2, 1], out[..., 2, 2] = co20, co21, co22
    return out / det[..., None, None]


def _inverse_small(m: np.ndarray) -> np.ndarray:
    n = m.shape[-1]
    if n == 2:
        return _inverse_2x2(m)
    if n == 3:
        return _inverse_3x3(m)
    return np.linalg.inv(m)


def cayley_update(rho: np.ndarray, h: np.ndarray, dt: float) -> np.ndarray:
    """rho <- U rho U^dagger with the Cayley approximant of exp(-iH dt/hbar)."""
    a = h * (0.5 * dt / hbar)
    eye = np.eye(a.shape[-1])
    u = _inverse_small(eye + 1j * a) @ (eye - 1j * a)
    return u @ rho @ np.conj(np.swapaxes(u, -1, -2))


class CellPropagator:
    """Precomputed splitting steps for one quantum system and timestep."""

    def __init__(self, system: QuantumSystem, dt: float,
                 noise: NoiseModel | None = None, use_kernels: bool = True):
        self.system = system
        self.dt = float(dt)
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        max_rate = max(system.scatter.max(initial=0.0), system.gamma.max(initial=0.0))
        if self.dt * max_rate >= 0.1:
            raise ConfigError(
                f"dt*max_rate = {self.dt * max_rate:.3g} >= 0.1; refine the grid "
                "or soften the rates")
        self.noise = noise or NoiseModel()
        n = system.num_levels
        pop_half = expm(system.rate_generator() * (0.5 * self.dt))
        # renormalize the stochastic map so column sums are 1 at machine
        # precision: keeps the trace error a random walk instead of a
        # drift over 1e7-step runs
        self._pop_half = pop_half / pop_half.sum(axis=0, keepdims=True)
        decay = np.exp(-system.gamma * (0.5 * self.dt))
        np.fill_diagonal(decay, 0.0)
        self._coh_half = decay
        self._h0 = system.bare_hamiltonian
        self._mu = system.dipole
        self.draw_slots = slots_for(self.noise.scheme, n)
        self._coeffs = None
        self._tunneling = 0.0
        if self.noise.scheme == "full":
            self._coeffs = ThreeLevelCoeffs.from_system(system)
            perm = self._coeffs.perm
            self._perm = perm
            self._inv_perm = np.argsort(perm)
            self._tunneling = float(system.tunneling[perm[0], perm[2]])
        self.clamp_events = 0
        self.draw_count = 0
        # fused-kernel fast path (identical math, one pass over cells)
        self._h0_scaled = self._h0 * (0.5 * self.dt / hbar)
        self._mu_scaled = self._mu * (0.5 * self.dt / hbar)
        self.use_kernels = bool(
            use_kernels and kernels.HAVE_NUMBA
            and ((n == 3 and self.noise.scheme in ("off", "full"))
                 or (n == 2 and self.noise.scheme in ("off", "reduced"))))

    # -- substeps ----------------------------------------------------------

    def dissipative_substep(self, rho: np.ndarray) -> np.ndarray:
        """Exact half-step relaxation: rate-matrix exponential on the
        populations, exponential decay on the coherences."""
        pops = np.einsum("...ii->...i", rho)
        out = rho * self._coh_half
        idx = np.arange(rho.shape[-1])
        out[..., idx, idx] = np.einsum("ij,...j->...i", self._pop_half, pops)
        return out

    def coherent_substep(self, rho: np.ndarray, e_field) -> np.ndarray:
        e_field = np.asarray(e_field, dtype=float)
        h = self._h0 - self._mu * e_field[..., None, None]
        return cayley_update(rho, h, self.dt)

    def fluctuation_substep(self, rho: np.ndarray, e_field, n_cell,
                            draws: np.ndarray) -> np.ndarray:
        """Ito kick rho += sqrt(dt) * F(rho); amplitudes use the pre-kick
        state.  ``draws`` are unit normals, shape rho.shape[:-2]+(slots,)."""
        if self.noise.scheme == "off":
            return rho
        if self.noise.scheme == "reduced":
            f, clamps = reduced_fluctuations(rho, self.system.scatter,
                                             self.system.gamma, n_cell, draws)
        else:
            perm, inv = self._perm, self._inv_perm
            rho_c = rho[..., perm, :][..., :, perm]
            f_c, clamps = full_fluctuation_vector(
                rho_c, self._coeffs, self._tunneling, e_field, n_cell, draws)
            f = f_c[..., inv, :][..., :, inv]
        self.clamp_events += clamps
        self.draw_count += int(np.prod(draws.shape))
        return rho + np.sqrt(self.dt) * f

    # -- one full step -----------------------------------------------------

    def full_step(self, rho: np.ndarray, e_field, n_cell=None,
                  draws: np.ndarray | None = None) -> np.ndarray:
        out = self.dissipative_substep(rho)
        out = self.coherent_substep(out, e_field)
        out = self.dissipative_substep(out)
        if self.noise.scheme != "off":
            if draws is None:
                raise ValueError("noise is on but no draws were supplied")
            out = self.fluctuation_substep(out, e_field, n_cell, draws)
        return hermitize(out)

    # -- fused path ----------------------------------------------------------

    def matter_step(self, rho: np.ndarray, e_field, n_cell=None,
                    draws: np.ndarray | None = None):
        """One full step plus the refreshed polarization.

        Dispatches to the compiled single-pass kernels when available;
        otherwise runs the reference array implementation.  Returns
        ``(rho, p_qm)``.
        """
        if not self.use_kernels:
            rho = self.full_step(rho, e_field, n_cell, draws)
            return rho, polarization(self.system, rho)
        sysm = self.system
        n = sysm.num_levels
        shape = rho.shape[:-2]
        flat = rho.reshape(-1, n, n)
        if not flat.flags.c_contiguous:
            flat = np.ascontiguousarray(flat)
        e_flat = np.ascontiguousarray(
            np.broadcast_to(np.asarray(e_field, dtype=float), shape).reshape(-1))
        noise_on = self.noise.scheme != "off"
        if noise_on:
            inv_sqrt = np.ascontiguousarray(
                np.broadcast_to(1.0 / np.sqrt(np.asarray(n_cell, dtype=float)),
                                shape).reshape(-1))
            d_flat = np.ascontiguousarray(
                draws.reshape(-1, self.draw_slots))
        else:
            inv_sqrt = np.zeros(1)
            d_flat = np.zeros((1, max(self.draw_slots, 1)))
        pol = np.empty(flat.shape[0])
        if n == 3:
            if noise_on:
                c = self._coeffs
                r = c.rates
                rates = (r[2, 1], r[1, 2], r[0, 2], r[2, 0], r[0, 1], r[1, 0])
                g = c.gamma
                gammas = (g[1, 2], g[0, 2], g[0, 1])
                dgam = max(g[1, 2] + g[0, 1] - g[0, 2], 0.0)
                psi_coef = -c.dipole_ul / hbar
                lvl = self._perm
            else:
                rates, gammas, dgam, psi_coef = (0.,) * 6, (0.,) * 3, 0.0, 0.0
                lvl = np.arange(3)
            clamps = kernels.matter_step_3(
                flat, e_flat, self._h0_scaled, self._mu_scaled,
                self._pop_half, self._coh_half, self._mu,
                sysm.carrier_density, d_flat, np.sqrt(self.dt), inv_sqrt,
                psi_coef, self._tunneling, rates, gammas, dgam,
                lvl.astype(np.int64), noise_on, pol)
        else:
            clamps = kernels.matter_step_2(
                flat, e_flat, self._h0_scaled, self._mu_scaled,
                self._pop_half, self._coh_half, self._mu,
                sysm.carrier_density, d_flat, np.sqrt(self.dt), inv_sqrt,
                sysm.scatter[0, 1], sysm.scatter[1, 0], sysm.gamma[0, 1],
                noise_on, pol)
        if noise_on:
            self.clamp_events += int(clamps)
            self.draw_count += int(np.prod(draws.shape))
        return flat.reshape(rho.shape), pol.reshape(shape)
