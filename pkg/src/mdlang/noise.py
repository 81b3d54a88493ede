"""Stochastic fluctuation terms for the density-matrix update.

Two schemes are implemented.  The ``reduced`` scheme keeps only the
dominant decay-driven terms and works for any level count: one real draw
per population pair and one complex draw per coherence pair.  The
``full`` scheme is specific to the three-level injector/lower/upper
topology and reproduces the complete classical noise covariance of
:mod:`mdlang.diffusion`, block by block (same draw layout, with the
field mode replaced by the local classical field).

Draws are unit normal; amplitudes carry the 1/sqrt(N_cell) ensemble
scaling, and the propagator multiplies the assembled increment by
sqrt(dt).  Negative radicands (possible for strongly non-equilibrium
states) are clamped to zero and counted; clamp totals surface in the run
diagnostics.

All functions broadcast over leading dimensions (cells, trajectories).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import hbar, k as k_boltzmann

from .quantum import ConfigError, QuantumSystem

SCHEMES = ("off", "reduced", "full")

#: real draw slots consumed per cell and step by each scheme
REDUCED_SLOTS = {2: 3, 3: 9}
FULL_SLOTS = 31


@dataclass(frozen=True)
class NoiseModel:
    """Scheme selector plus RNG stream configuration."""

    scheme: str = "off"
    seed: int = 0
    n_cell: float | np.ndarray | None = None   # None -> derive from density

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"noise scheme must be one of {SCHEMES}")
        if self.scheme != "off" and self.n_cell is not None:
            if np.any(np.asarray(self.n_cell) <= 0):
                raise ConfigError("n_cell must be positive where noise is on")


class NoiseStreams:
    """Counter-based Gaussian streams keyed by (seed, step, lane).

    Every step gets a disjoint counter block of a Philox generator, so
    the draws for a step are a pure function of (seed, step) and do not
    depend on execution order or worker count.  Lane 1 is reserved for
    initial-condition draws.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & (2**64 - 1)

    def _generator(self, step: int, lane: int = 0) -> np.random.Generator:
        counter = [0, int(step), int(lane), 0]
        return np.random.Generator(np.random.Philox(key=self.seed, counter=counter))

    def step_normals(self, step: int, shape) -> np.ndarray:
        return self._generator(step, lane=0).standard_normal(shape)

    def init_generator(self) -> np.random.Generator:
        return self._generator(0, lane=1)


def slots_for(scheme: str, num_levels: int) -> int:
    if scheme == "off":
        return 0
    if scheme == "reduced":
        n = num_levels
        return 3 * (n * (n - 1) // 2)
    if scheme == "full":
        if num_levels != 3:
            raise ConfigError("full noise scheme requires exactly 3 levels")
        return FULL_SLOTS
    raise ConfigError(f"unknown scheme {scheme!r}")


# ---------------------------------------------------------------------------
# reduced scheme
# ---------------------------------------------------------------------------

def reduced_population_noise(i: int, j: int, rho: np.ndarray, scatter: np.ndarray,
                             n_cell, xi1: np.ndarray):
    """Antisymmetric population kick for the (i, j) pair.

    Returns the increment applied to rho_ii; the caller subtracts the
    same amount from rho_jj.  Radicand: (r_ji rho_ii + r_ij rho_jj)/N.
    """
    if i == j:
        raise ValueError("population pair needs i != j")
    rad = (scatter[j, i] * rho[..., i, i].real
           + scatter[i, j] * rho[..., j, j].real) / n_cell
    clamped = int(np.count_nonzero(rad < 0))
    return xi1 * np.sqrt(np.maximum(rad, 0.0)), clamped


def reduced_coherence_noise(i: int, j: int, rho: np.ndarray, scatter: np.ndarray,
                            gamma: np.ndarray, n_cell, xi2, xi3):
    """Complex kick on the (i, j) coherence, i > j in the level ordering.

    The conjugate partner must be applied to the mirror element.  The
    radicand is keyed to level j: (-rho_jj/tau_j + sum_n r_jn rho_nn
    + 2 gamma_ij rho_jj) / (2 N).
    """
    if not i > j:
        raise ValueError("coherence pair expects i > j")
    pops = np.einsum("...ii->...i", rho).real
    inv_tau_j = scatter[:, j].sum()
    feed = np.einsum("n,...n->...", scatter[j], pops) - scatter[j, j] * pops[..., j]
    rad = (-inv_tau_j * pops[..., j] + feed
           + 2.0 * gamma[i, j] * pops[..., j]) / (2.0 * n_cell)
    clamped = int(np.count_nonzero(rad < 0))
    return (xi2 + 1j * xi3) * np.sqrt(np.maximum(rad, 0.0)), clamped


def reduced_fluctuations(rho: np.ndarray, scatter: np.ndarray, gamma: np.ndarray,
                         n_cell, draws: np.ndarray):
    """Assembled Hermitian fluctuation matrix for the reduced scheme.

    ``draws`` holds ``3 * n_pairs`` unit normals per cell (population
    slots first, then two per coherence pair).
    """
    n = rho.shape[-1]
    pairs = [(i, j) for i in range(n) for j in range(i)]
    out = np.zeros_like(rho)
    clamps = 0
    for k, (i, j) in enumerate(pairs):
        kick, c = reduced_population_noise(i, j, rho, scatter, n_cell, draws[..., k])
        out[..., i, i] += kick
        out[..., j, j] -= kick
        clamps += c
    base = len(pairs)
    for k, (i, j) in enumerate(pairs):
        kick, c = reduced_coherence_noise(i, j, rho, scatter, gamma, n_cell,
                                          draws[..., base + 2 * k],
                                          draws[..., base + 2 * k + 1])
        # kick lands on <s_ij> = rho[j, i]
        out[..., j, i] += kick
        out[..., i, j] += np.conj(kick)
        clamps += c
    return out, clamps


# ---------------------------------------------------------------------------
# full three-level scheme
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThreeLevelCoeffs:
    """Precomputed rate bundle for the full scheme, in the canonical
    (injector, lower, upper) = (0, 1, 2) level order."""

    rates: np.ndarray      # (3, 3) scatter, canonical order
    gamma: np.ndarray      # (3, 3) total dephasing
    dipole_ul: float       # C m, upper-lower dipole element
    perm: np.ndarray       # canonical index -> config index

    @classmethod
    def from_system(cls, system: QuantumSystem) -> "ThreeLevelCoeffs":
        if system.num_levels != 3:
            raise ConfigError("full noise scheme requires exactly 3 levels")
        tun = {tuple(sorted(p)) for p in zip(*np.nonzero(system.tunneling))}
        dip = {tuple(sorted(p)) for p in zip(*np.nonzero(system.dipole))}
        if len(tun) != 1 or len(dip) != 1:
            raise ConfigError("full scheme expects one tunneling and one "
                              "optical transition")
        tun_pair, dip_pair = tun.pop(), dip.pop()
        shared = set(tun_pair) & set(dip_pair)
        if len(shared) != 1:
            raise ConfigError("tunneling and optical transitions must share "
                              "exactly one level (the upper laser level)")
        upper = shared.pop()
        injector = (set(tun_pair) - {upper}).pop()
        lower = (set(dip_pair) - {upper}).pop()
        perm = np.array([injector, lower, upper])
        rates = system.scatter[np.ix_(perm, perm)]
        gamma = system.gamma[np.ix_(perm, perm)]
        return cls(rates=rates, gamma=gamma,
                   dipole_ul=float(system.dipole[upper, lower]), perm=perm)


def full_fluctuation_vector(rho: np.ndarray, coeffs: ThreeLevelCoeffs,
                            tunneling: float, e_field: np.ndarray,
                            n_cell, draws: np.ndarray):
    """Hermitian fluctuation matrix of the full scheme (canonical order).

    ``rho`` must already be in the canonical (injector, lower, upper)
    order; ``draws`` holds 31 unit normals per cell.  Returns
    ``(F, clamp_count)``.
    """
    r = coeffs.rates
    g = coeffs.gamma
    r32, r23, r13, r31, r12, r21 = (r[2, 1], r[1, 2], r[0, 2],
                                    r[2, 0], r[0, 1], r[1, 0])
    g23, g13, g12 = g[1, 2], g[0, 2], g[0, 1]
    inv_tau_up, inv_tau_in = r23 + r13, r21 + r31
    # negative combined-dephasing exchange is a static (config-level)
    # pathology; it is floored here and surfaced by the propagator setup
    dgam = max(g23 + g12 - g13, 0.0)

    psi = -coeffs.dipole_ul * np.asarray(e_field) / hbar   # rad/s, signed
    apsi = np.abs(psi)

    p_in = rho[..., 0, 0].real
    p_lo = rho[..., 1, 1].real
    p_up = rho[..., 2, 2].real
    z23, z31, z21 = rho[..., 2, 1], rho[..., 0, 2], rho[..., 0, 1]
    z23c, z31c, z21c = np.conj(z23), np.conj(z31), np.conj(z21)

    out = np.zeros_like(rho)
    clamps = 0

    # matrix slots: noise on <s_ij> lands on rho[j, i]
    UP, LO, IN = (2, 2), (1, 1), (0, 0)
    OPT, OPTC = (2, 1), (1, 2)       # s23 value / its conjugate
    TUN, TUNC = (0, 2), (2, 0)       # s31 value / conjugate
    INJ, INJC = (0, 1), (1, 0)       # s21 value / conjugate

    az23 = np.abs(z23)
    az31 = np.abs(z31)
    az21 = np.abs(z21)

    def ladder(alpha, cross, coh, pops, d1, d2):
        """Shared draw between one coherence pair and one population pair."""
        with np.errstate(invalid="ignore", divide="ignore"):
            safe = np.where(alpha == 0, 1.0, alpha)
            k_over_a = np.where(alpha == 0, 0.0, cross / safe)
        b = k_over_a.real
        c_im = k_over_a.imag
        f_star = alpha * (d1 - 1j * d2)
        out[..., coh[1][0], coh[1][1]] += f_star          # starred row
        out[..., coh[0][0], coh[0][1]] += np.conj(f_star)
        pop_kick = -b * d1 + c_im * d2
        out[..., pops[0][0], pops[0][1]] += pop_kick
        out[..., pops[1][0], pops[1][1]] -= pop_kick

    scale = 1.0 / np.sqrt(np.asarray(n_cell, dtype=float))

    d = np.moveaxis(draws, -1, 0) * scale  # (31, ...) with ensemble scaling

    # scattering ladders; amplitudes are weighted by the magnitude of the
    # coherence they feed so every block vanishes with its coherence and
    # the zero-coherence limit reproduces the reduced scheme exactly
    ladder(np.sqrt(r32 * az23), r32 * z23c, (OPT, OPTC), (UP, LO), d[0], d[1])
    ladder(np.sqrt(r12 * az23), -r12 * z23c, (OPT, OPTC), (LO, IN), d[2], d[3])
    ladder(np.sqrt(r13 * az31), -r13 * z31c, (TUN, TUNC), (UP, IN), d[4], d[5])
    ladder(np.sqrt(r23 * az31), -r23 * z31c, (TUN, TUNC), (UP, LO), d[6], d[7])
    with np.errstate(invalid="ignore", divide="ignore"):
        phase = np.where(apsi == 0, 0.0, 1j * psi / np.where(apsi == 0, 1.0, apsi))
    ladder(phase * np.sqrt(apsi * az21), 1j * psi * z21c,
           (TUN, TUNC), (UP, LO), d[8], d[9])
    ladder(np.sqrt(r12 * az21), -r12 * z21c, (INJ, INJC), (LO, IN), d[10], d[11])
    ladder(np.sqrt(r32 * az21), r32 * z21c, (INJ, INJC), (UP, LO), d[12], d[13])

    # population exchange draws
    def pop_pair(var, pops, dk):
        nonlocal clamps
        clamps += int(np.count_nonzero(var < 0))
        kick = np.sqrt(np.maximum(var, 0.0)) * dk
        out[..., pops[0][0], pops[0][1]] += kick
        out[..., pops[1][0], pops[1][1]] -= kick

    var_up_lo = (r23 * p_up + r32 * p_lo - 2.0 * psi * z23.imag
                 - r32 * az23 - r23 * az31 - apsi * az21 - r32 * az21)
    var_up_in = (r31 * p_in + r13 * (p_up - az31) + 2.0 * tunneling * z31.imag)
    var_lo_in = r21 * p_in + r12 * (p_lo - az23 - az21)
    pop_pair(var_up_lo, (UP, LO), d[14])
    pop_pair(var_up_in, (UP, IN), d[15])
    pop_pair(var_lo_in, (LO, IN), d[16])

    # conjugate-column self terms (complex amplitude, one real draw)
    f_opt = np.sqrt((-2j * psi * z23c).astype(complex))
    out[..., OPTC[0], OPTC[1]] += f_opt * d[17]
    out[..., OPT[0], OPT[1]] += np.conj(f_opt) * d[17]
    f_tun = np.sqrt((2j * tunneling * z31c).astype(complex))
    out[..., TUNC[0], TUNC[1]] += f_tun * d[18]
    out[..., TUN[0], TUN[1]] += np.conj(f_tun) * d[18]

    # coherence-coherence cross draws
    def cross(u, v, coh1, coh2, d1, d2):
        """Rows (x*, y*, y, x) with y = v-row; x gets conj pairing."""
        zeta = d1 + 1j * d2
        out[..., coh1[1][0], coh1[1][1]] += u * zeta
        out[..., coh1[0][0], coh1[0][1]] += np.conj(u * zeta)
        out[..., coh2[1][0], coh2[1][1]] += v * np.conj(zeta)
        out[..., coh2[0][0], coh2[0][1]] += np.conj(v) * zeta

    def _v_from(target, u):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(u == 0, 0.0, target / np.where(u == 0, 1.0, 2.0 * u))

    u1 = np.sqrt((0.5j * psi * az31).astype(complex))
    cross(u1, _v_from(1j * psi * z31c, u1), (OPT, OPTC), (TUN, TUNC), d[19], d[20])
    u2 = np.sqrt((-0.5j * psi * az21).astype(complex))
    cross(u2, _v_from(-1j * psi * z21c, u2), (OPT, OPTC), (INJ, INJC), d[21], d[22])
    # dephasing-exchange draw couples the optical pair to the injector
    # pair through the tunneling coherence
    u3 = np.sqrt(0.5 * dgam * az31)
    v3 = _v_from(dgam * z31, u3)
    zeta = d[23] + 1j * d[24]
    out[..., OPTC[0], OPTC[1]] += u3 * zeta
    out[..., OPT[0], OPT[1]] += np.conj(u3 * zeta)
    out[..., INJ[0], INJ[1]] += v3 * np.conj(zeta)
    out[..., INJC[0], INJC[1]] += np.conj(v3) * zeta

    # remainder draws on the conjugate coherence pairs
    def remainder(m2, coh, d1, d2):
        nonlocal clamps
        clamps += int(np.count_nonzero(m2 < 0))
        m = np.sqrt(np.maximum(m2, 0.0))
        kick = m * (d1 + 1j * d2)
        out[..., coh[1][0], coh[1][1]] += kick          # starred slot
        out[..., coh[0][0], coh[0][1]] += np.conj(kick)

    m_opt = 0.5 * ((2 * g23 - inv_tau_up) * p_up + r32 * p_lo + r31 * p_in
                   - 2 * (r32 + r12) * az23 - 2 * apsi * az23
                   - apsi * az31 - apsi * az21 - dgam * az31)
    m_tun = 0.5 * ((2 * g13 - inv_tau_in) * p_in + r12 * p_lo + r13 * p_up
                   - 2 * (r13 + r23) * az31 - 2 * apsi * az21
                   - 2 * abs(tunneling) * az31 - apsi * az31)
    m_inj = 0.5 * ((2 * g12 - inv_tau_in) * p_in + r12 * p_lo + r13 * p_up
                   - 2 * (r12 + r32) * az21 - apsi * az21 - dgam * az31)
    remainder(m_opt, (OPT, OPTC), d[25], d[26])
    remainder(m_tun, (TUN, TUNC), d[27], d[28])
    remainder(m_inj, (INJ, INJC), d[29], d[30])

    return out, clamps


# ---------------------------------------------------------------------------
# initial conditions and reservoir helpers
# ---------------------------------------------------------------------------

def initial_condition_2lvl(n_cell, rng: np.random.Generator, shape=()):
    """Fully inverted two-level states tipped by a random small angle.

    The tipping angle is normal with standard deviation 2/sqrt(N_cell);
    the azimuth is uniform.  Index 0 is the ground level, index 1 the
    excited level.  Returns density matrices of shape ``shape + (2, 2)``.
    """
    n_cell = np.asarray(n_cell, dtype=float)
    if np.any(n_cell <= 0):
        raise ConfigError("n_cell must be positive")
    theta = rng.normal(0.0, 1.0, size=shape) * 2.0 / np.sqrt(n_cell)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    rho = np.zeros(tuple(np.shape(theta)) + (2, 2), dtype=complex)
    rho[..., 1, 1] = np.cos(theta / 2.0) ** 2
    rho[..., 0, 0] = np.sin(theta / 2.0) ** 2
    coh = 0.5 * np.sin(theta) * np.exp(1j * phi)
    rho[..., 1, 0] = coh          # <e|rho|g>
    rho[..., 0, 1] = np.conj(coh)
    return rho


def thermal_photon_number(omega0: float, temperature: float) -> float:
    """Bose occupation of the lasing mode at the given temperature."""
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0:
        return 0.0
    return 1.0 / np.expm1(hbar * omega0 / (k_boltzmann * temperature))
