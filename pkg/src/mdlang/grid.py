"""Staggered-grid 1D field propagation coupled to the quantum polarization.

E_z lives on the M+1 integer nodes, H_y on the M half-cells, and the
quantum state on the M cells.  The update is the standard leapfrog

    H^(n+1/2) = H^(n-1/2) + dt/(mu dx) * diff(E^n)
    E^(n+1)   = ca * E^n + cb * (dH/dx - overlap * dP_qm)

with semi-implicit conductor loss (ca, cb) and the instantaneous
background susceptibility folded into the permittivity.  Facet nodes are
driven by an exact characteristic boundary: at the in-medium magic
timestep (c_medium dt = dx) an outgoing wave leaves without numerical
reflection and re-enters scaled by the configured amplitude
reflectivity.  A perfect reflector is reflectivity -1 (sign-inverting),
an open/matched facet is 0.

All field arrays may carry leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as c_light, epsilon_0, mu_0

from .quantum import ConfigError


@dataclass(frozen=True)
class MaterialParams:
    """Uniform background medium for the waveguide section."""

    eps_r: float = 1.0        # relative permittivity
    chi: float = 0.0          # instantaneous background susceptibility
    sigma: float = 0.0        # S/m conductor loss
    overlap: float = 1.0      # transverse confinement factor, in [0, 1]
    mu_r: float = 1.0

    def __post_init__(self):
        if self.eps_r < 1.0:
            raise ConfigError("eps_r must be >= 1")
        if self.sigma < 0.0:
            raise ConfigError("sigma must be >= 0")
        if not 0.0 <= self.overlap <= 1.0:
            raise ConfigError("overlap factor must lie in [0, 1]")

    @property
    def eps(self) -> float:
        """Effective permittivity including the instantaneous response."""
        return epsilon_0 * (self.eps_r + self.chi)

    @property
    def refractive_index(self) -> float:
        return float(np.sqrt((self.eps_r + self.chi) * self.mu_r))

    @property
    def impedance(self) -> float:
        return float(np.sqrt(mu_0 * self.mu_r / self.eps))


def courant_timestep(dx: float, refractive_index: float = 1.0,
                     stability: float = 1.0) -> float:
    """Largest stable timestep stability * n * dx / c (the 1D magic step
    at stability 1; pass the smallest index present on the grid)."""
    if dx <= 0 or refractive_index < 1.0 or not 0 < stability <= 1.0:
        raise ConfigError("need dx > 0, n >= 1 and 0 < stability <= 1")
    return stability * dx * refractive_index / c_light


@dataclass
class BoundarySpec:
    """Facet description: 'reflect', 'absorb' or 'facet' with amplitude
    reflectivity in [0, 1]."""

    kind: str = "reflect"
    reflectivity: float = 0.0

    def __post_init__(self):
        if self.kind not in ("reflect", "absorb", "facet"):
            raise ConfigError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "facet" and not 0.0 <= self.reflectivity <= 1.0:
            raise ConfigError("facet reflectivity must lie in [0, 1]")

    @property
    def edge_coefficient(self) -> float:
        if self.kind == "reflect":
            return -1.0
        if self.kind == "absorb":
            return 0.0
        return float(self.reflectivity)


@dataclass
class GridState:
    """Complete field/matter state of a run (leading dims = batch)."""

    dx: float
    dt: float
    e: np.ndarray                 # (..., M+1) V/m
    h: np.ndarray                 # (..., M) A/m
    rho: np.ndarray | None = None  # (..., M, N, N)
    p_qm: np.ndarray | None = None      # (..., M) C/m^2
    p_qm_prev: np.ndarray | None = None
    n_cell: np.ndarray | float = 1.0
    # characteristic-boundary memory (two past incoming amplitudes per side)
    bmem_left: tuple = (0.0, 0.0)
    bmem_right: tuple = (0.0, 0.0)
    energy_out_left: np.ndarray | float = 0.0
    energy_out_right: np.ndarray | float = 0.0

    @property
    def num_cells(self) -> int:
        return self.e.shape[-1] - 1

    @classmethod
    def allocate(cls, num_cells: int, dx: float, dt: float,
                 materials: MaterialParams, num_levels: int | None = None,
                 batch_shape=()) -> "GridState":
        limit = dx * materials.refractive_index / c_light
        if dt > limit * (1.0 + 1e-12):
            raise ConfigError(
                f"dt = {dt:.4g} exceeds the stability bound {limit:.4g}")
        e = np.zeros(batch_shape + (num_cells + 1,))
        h = np.zeros(batch_shape + (num_cells,))
        rho = p = p_prev = None
        if num_levels:
            rho = np.zeros(batch_shape + (num_cells, num_levels, num_levels),
                           dtype=complex)
            p = np.zeros(batch_shape + (num_cells,))
            p_prev = np.zeros(batch_shape + (num_cells,))
        z = np.zeros(batch_shape) if batch_shape else 0.0
        return cls(dx=dx, dt=dt, e=e, h=h, rho=rho, p_qm=p, p_qm_prev=p_prev,
                   bmem_left=(z, z), bmem_right=(z, z),
                   energy_out_left=np.zeros(batch_shape) if batch_shape else 0.0,
                   energy_out_right=np.zeros(batch_shape) if batch_shape else 0.0)


def update_h(state: GridState, materials: MaterialParams) -> None:
    """Half-step advance of H from the E curl."""
    coeff = state.dt / (mu_0 * materials.mu_r * state.dx)
    state.h += coeff * np.diff(state.e, axis=-1)


def update_e(state: GridState, materials: MaterialParams,
             dp_qm=None) -> None:
    """Full-step advance of the interior E nodes.

    ``dp_qm`` is the per-cell time derivative of the quantum polarization
    (C/m^2/s); it is averaged onto the interior nodes.  Facet nodes are
    owned by :func:`apply_boundaries`.
    """
    eps = materials.eps
    loss = materials.sigma * state.dt / (2.0 * eps)
    ca = (1.0 - loss) / (1.0 + loss)
    cb = (state.dt / eps) / (1.0 + loss)
    curl = np.diff(state.h, axis=-1) / state.dx
    drive = curl
    if dp_qm is not None:
        node_dp = 0.5 * (dp_qm[..., :-1] + dp_qm[..., 1:])
        drive = curl - materials.overlap * node_dp
    state.e[..., 1:-1] = ca * state.e[..., 1:-1] + cb * drive


def apply_boundaries(state: GridState, materials: MaterialParams,
                     left: BoundarySpec, right: BoundarySpec,
                     e1_old, em_old) -> None:
    """Characteristic facet update; exact at the in-medium magic step.

    ``e1_old``/``em_old`` are the previous-step values of the nodes
    adjacent to the facets.  Energy leaving each facet accumulates into
    the per-side outflow records (W/m^2 integrated over time).
    """
    eta = materials.impedance
    r_l, r_r = left.edge_coefficient, right.edge_coefficient

    b_prev, b_prev2 = state.bmem_left
    b_new = e1_old - r_l * b_prev2
    state.e[..., 0] = (1.0 + r_l) * b_new
    state.bmem_left = (b_new, b_prev)
    state.energy_out_left = state.energy_out_left + \
        state.dt * (1.0 - r_l**2) * b_new**2 / eta

    b_prev, b_prev2 = state.bmem_right
    b_new = em_old - r_r * b_prev2
    state.e[..., -1] = (1.0 + r_r) * b_new
    state.bmem_right = (b_new, b_prev)
    state.energy_out_right = state.energy_out_right + \
        state.dt * (1.0 - r_r**2) * b_new**2 / eta


def cell_field(e: np.ndarray) -> np.ndarray:
    """Midpoint average of the node field onto the cells."""
    return 0.5 * (e[..., :-1] + e[..., 1:])


def field_energy(state: GridState, materials: MaterialParams,
                 h_prev: np.ndarray) -> np.ndarray:
    """Discrete field energy per cross-section area (J/m^2).

    Uses the staggered-consistent product form eps/2 E^2 + mu/2 H- H+
    which is exactly conserved by the lossless source-free update."""
    e_part = 0.5 * materials.eps * np.sum(state.e**2, axis=-1)
    h_part = 0.5 * mu_0 * materials.mu_r * np.sum(h_prev * state.h, axis=-1)
    return (e_part + h_part) * state.dx


def gaussian_pulse(state: GridState, materials: MaterialParams, center: float,
                   width: float, amplitude: float = 1.0,
                   carrier_frequency: float = 0.0) -> None:
    """Launch a right-moving pulse (exact unidirectional at magic step)."""
    x_e = np.arange(state.num_cells + 1) * state.dx
    x_h = (np.arange(state.num_cells) + 0.5) * state.dx
    v = c_light / materials.refractive_index

    def profile(x, t):
        env = amplitude * np.exp(-0.5 * ((x - center - v * t) / width) ** 2)
        if carrier_frequency:
            env = env * np.cos(2 * np.pi * carrier_frequency * (x - center - v * t) / v)
        return env

    state.e[...] = profile(x_e, 0.0)
    state.h[...] = -profile(x_h, 0.5 * state.dt) / materials.impedance
