"""Reproducible run descriptors for the two reference experiments.

``superfluorescence_scenario`` builds the two-level ensemble test: an
initially inverted medium seeded only by the random tipping angle and
the reduced fluctuation scheme.  With slow dephasing the ensemble emits
a delayed cooperative pulse; fast dephasing suppresses the collective
buildup and leaves amplified spontaneous emission.

``qcl_hfc_scenario`` builds the three-level cascade-laser comb setup: a
4 mm double-metal cavity (group index tuned to a 9.94 GHz free spectral
range) with a diagonal ~3.5 THz transition, resonant-tunneling injection
and the full fluctuation scheme, self-starting from noise.  The
microscopic rates in the shipped parameter file are documented
estimates; replace them with transport-solver output when available.

Scenario files are plain JSON with explicit units on every quantity and
a schema_version field; ``Scenario.to_dict``/``from_dict`` round-trip
losslessly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.constants import c as c_light, h as planck, hbar

from . import units
from .grid import BoundarySpec, MaterialParams
from .noise import NoiseModel
from .quantum import ConfigError, QuantumSystem

SCHEMA_VERSION = 1
_CONFIG_DIR = Path(__file__).parent / "configs"


@dataclass(frozen=True)
class ProbeSpec:
    """One recorded quantity: a field position or a medium average."""

    name: str
    kind: str                  # e_field | h_field | poynting | population:<k>
    #                          # | inversion | bloch_ratio | coherence:<i>,<j>
    position: float | None = None   # m; None for medium averages
    decimate: int = 1

    def needs_position(self) -> bool:
        return self.kind in ("e_field", "h_field", "poynting")


@dataclass
class Scenario:
    """Fully parameterized, serializable simulation setup."""

    name: str
    system: QuantumSystem
    material: MaterialParams
    length: float                 # m
    cross_section: float          # m^2
    cells: int
    left: BoundarySpec
    right: BoundarySpec
    noise: NoiseModel
    duration: float               # s
    initial: dict = field(default_factory=lambda: {"kind": "populations"})
    probes: tuple = ()
    stability: float = 1.0
    snapshot_every: int = 0
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cells < 1 or self.length <= 0:
            raise ConfigError("need positive length and at least one cell")
        for p in self.probes:
            if p.needs_position():
                if p.position is None or not 0 <= p.position <= self.length:
                    raise ConfigError(
                        f"probe {p.name!r} position outside [0, length]")

    @property
    def dx(self) -> float:
        return self.length / self.cells

    @property
    def n_cell(self) -> np.ndarray | float:
        if self.noise.n_cell is not None:
            return self.noise.n_cell
        return self.system.carrier_density * self.cross_section * self.dx

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        sysm = self.system
        names = list(sysm.level_names)

        def pairs(matrix, key):
            out = []
            for i in range(len(names)):
                for j in range(i):
                    if matrix[i, j] != 0.0:
                        out.append({"levels": [names[j], names[i]],
                                    key: {"value": matrix[i, j], "unit": _UNIT[key]}})
            return out

        scattering = []
        for i in range(len(names)):
            for j in range(len(names)):
                if i != j and sysm.scatter[i, j] != 0.0:
                    scattering.append({"from": names[j], "to": names[i],
                                       "rate": {"value": sysm.scatter[i, j],
                                                "unit": "1/s"}})
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "levels": [{"name": n, "energy": {"value": e, "unit": "J"}}
                       for n, e in zip(names, sysm.energies)],
            "dipole": pairs(sysm.dipole, "moment"),
            "tunneling": pairs(sysm.tunneling, "coupling"),
            "scattering": scattering,
            "pure_dephasing": pairs(sysm.dephasing_p, "rate"),
            "carrier_density": {"value": sysm.carrier_density, "unit": "1/m^3"},
            "period_length": {"value": sysm.period_length, "unit": "m"},
            "material": {"eps_r": self.material.eps_r, "chi": self.material.chi,
                         "sigma": {"value": self.material.sigma, "unit": "S/m"},
                         "overlap": self.material.overlap},
            "geometry": {"length": {"value": self.length, "unit": "m"},
                         "cross_section": {"value": self.cross_section,
                                           "unit": "m^2"},
                         "cells": self.cells},
            "boundaries": {side: {"kind": b.kind, "reflectivity": b.reflectivity}
                           for side, b in (("left", self.left), ("right", self.right))},
            "noise": {"scheme": self.noise.scheme, "seed": self.noise.seed,
                      "n_cell": ("derived" if self.noise.n_cell is None
                                 else self.noise.n_cell)},
            "initial": self.initial,
            "duration": {"value": self.duration, "unit": "s"},
            "stability": self.stability,
            "probes": [{"name": p.name, "kind": p.kind,
                        "position": (None if p.position is None else
                                     {"value": p.position, "unit": "m"}),
                        "decimate": p.decimate} for p in self.probes],
            "snapshot_every": self.snapshot_every,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, cfg: dict) -> "Scenario":
        missing = [k for k in ("schema_version", "name", "levels", "scattering",
                               "geometry", "boundaries", "noise", "duration")
                   if k not in cfg]
        if missing:
            raise ConfigError(f"scenario file is missing keys: {missing}")
        if cfg["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported schema_version {cfg['schema_version']}")
        names = [lv["name"] for lv in cfg["levels"]]
        n = len(names)
        idx = {nm: i for i, nm in enumerate(names)}
        energies = np.array([units.quantity(lv["energy"], "energy")
                             for lv in cfg["levels"]])

        def matrix(entries, key, parser):
            m = np.zeros((n, n))
            for ent in entries:
                a, b = (idx[x] for x in ent["levels"])
                m[a, b] = m[b, a] = parser(ent[key])
            return m

        dipole = matrix(cfg.get("dipole", ()), "moment",
                        lambda q: units.quantity(q, "dipole"))
        tunneling = matrix(cfg.get("tunneling", ()), "coupling",
                           units.as_angular_rate)
        dephasing = matrix(cfg.get("pure_dephasing", ()), "rate",
                           lambda q: units.quantity(q, "rate"))
        scatter = np.zeros((n, n))
        for ent in cfg["scattering"]:
            scatter[idx[ent["to"]], idx[ent["from"]]] = units.quantity(
                ent["rate"], "rate")
        system = QuantumSystem(
            energies=energies, dipole=dipole, tunneling=tunneling,
            scatter=scatter, dephasing_p=dephasing,
            carrier_density=units.quantity(cfg["carrier_density"], "density"),
            period_length=units.quantity(cfg.get("period_length", 0.0), "length")
            if cfg.get("period_length") else 0.0,
            level_names=tuple(names))
        mat = cfg.get("material", {})
        material = MaterialParams(
            eps_r=mat.get("eps_r", 1.0), chi=mat.get("chi", 0.0),
            sigma=units.quantity(mat.get("sigma", 0.0), "conductivity")
            if mat.get("sigma") else 0.0,
            overlap=mat.get("overlap", 1.0))
        geom = cfg["geometry"]
        bounds = {}
        for side in ("left", "right"):
            b = cfg["boundaries"][side]
            bounds[side] = BoundarySpec(kind=b["kind"],
                                        reflectivity=b.get("reflectivity", 0.0))
        ncfg = cfg["noise"]
        n_cell = None if ncfg.get("n_cell", "derived") == "derived" else ncfg["n_cell"]
        noise = NoiseModel(scheme=ncfg["scheme"], seed=int(ncfg.get("seed", 0)),
                           n_cell=n_cell)
        probes = tuple(
            ProbeSpec(name=p["name"], kind=p["kind"],
                      position=(None if p.get("position") is None
                                else units.quantity(p["position"], "length")),
                      decimate=int(p.get("decimate", 1)))
            for p in cfg.get("probes", ()))
        return cls(name=cfg["name"], system=system, material=material,
                   length=units.quantity(geom["length"], "length"),
                   cross_section=units.quantity(geom["cross_section"], "area"),
                   cells=int(geom["cells"]), left=bounds["left"],
                   right=bounds["right"], noise=noise,
                   duration=units.quantity(cfg["duration"], "time"),
                   initial=cfg.get("initial", {"kind": "populations"}),
                   probes=probes, stability=float(cfg.get("stability", 1.0)),
                   snapshot_every=int(cfg.get("snapshot_every", 0)),
                   notes=cfg.get("notes", {}))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


_UNIT = {"moment": "C m", "coupling": "rad/s", "rate": "1/s"}


def bloch_vector_metric(rho: np.ndarray):
    """Bloch components (r1, r2, r3) and the inversion-to-length ratio
    r3/|r| of a two-level state (ground = index 0, excited = index 1).

    Returns ``(r1, r2, r3, ratio)``; the ratio is NaN where the Bloch
    vector has zero length.  Broadcasts over leading dimensions."""
    rho = np.asarray(rho)
    if rho.shape[-2:] != (2, 2):
        raise ValueError("Bloch metric needs two-level states")
    coh = rho[..., 1, 0]            # <e|rho|g>
    r1 = 2.0 * coh.real
    r2 = 2.0 * coh.imag
    r3 = (rho[..., 1, 1] - rho[..., 0, 0]).real
    norm = np.sqrt(r1**2 + r2**2 + r3**2)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(norm > 0, r3 / np.where(norm > 0, norm, 1.0), np.nan)
    return r1, r2, r3, ratio


# ---------------------------------------------------------------------------
# shipped setups
# ---------------------------------------------------------------------------

def superfluorescence_scenario(t2: float = 100e-12, **overrides) -> Scenario:
    """Two-level inverted-ensemble emission test.

    ``t2`` is the coherence time; 100 ps gives a delayed cooperative
    pulse, 14.3 ps leaves amplified spontaneous emission.  All medium
    parameters live in the returned descriptor (and in the shipped
    config file) so they can be retuned freely.
    """
    if t2 <= 0:
        raise ConfigError("t2 must be positive")
    wavelength = overrides.pop("wavelength", 4.0e-6)
    t1 = overrides.pop("t1", 500e-12)
    dipole = overrides.pop("dipole", 2.0e-29)
    density = overrides.pop("carrier_density", 1.1e22)
    length = overrides.pop("length", 120e-6)
    cells = overrides.pop("cells", 480)
    cross_section = overrides.pop("cross_section", 1.0e-7)
    duration = overrides.pop("duration", 320e-12)
    seed = overrides.pop("seed", 1234)
    omega0 = 2 * np.pi * c_light / wavelength
    gamma_p = max(1.0 / t2 - 0.5 / t1, 0.0)
    system = QuantumSystem(
        energies=np.array([0.0, hbar * omega0]),
        dipole=np.array([[0.0, dipole], [dipole, 0.0]]),
        tunneling=np.zeros((2, 2)),
        scatter=np.array([[0.0, 1.0 / t1], [0.0, 0.0]]),
        dephasing_p=np.array([[0.0, gamma_p], [gamma_p, 0.0]]),
        carrier_density=density,
        level_names=("g", "e"))
    probes = (
        ProbeSpec("facet", "e_field", position=length, decimate=1),
        ProbeSpec("inversion", "inversion", decimate=20),
        ProbeSpec("bloch_ratio", "bloch_ratio", decimate=20),
    )
    scn = Scenario(
        name=f"superfluorescence_t2_{t2 * 1e12:g}ps",
        system=system, material=MaterialParams(),
        length=length, cross_section=cross_section, cells=cells,
        left=BoundarySpec("absorb"), right=BoundarySpec("absorb"),
        noise=NoiseModel(scheme="reduced", seed=seed),
        duration=duration,
        initial={"kind": "tipped_inversion"},
        probes=probes,
        notes={"t2": t2, "t1": t1,
               "description": "inverted two-level ensemble; emission seeded "
                              "by tipping-angle and reduced-scheme noise"})
    if overrides:
        raise ConfigError(f"unknown overrides: {sorted(overrides)}")
    return scn


def qcl_hfc_scenario(params_file=None, **overrides) -> Scenario:
    """Three-level THz cascade-laser comb setup (self-starting).

    Loads the shipped parameter file unless ``params_file`` is given.
    Macroscopic targets: 4 mm cavity, 9.94 GHz free spectral range
    (group index 3.77), ~3.5 THz transition, 80 K operating point at
    50 mV/period bias.  Microscopic rates are documented estimates."""
    path = Path(params_file) if params_file else _CONFIG_DIR / "qcl_hfc_3level.json"
    scn = Scenario.load(path)
    if overrides:
        d = scn.to_dict()
        for key, value in overrides.items():
            if key not in d:
                raise ConfigError(f"unknown override {key!r}")
            d[key] = value
        scn = Scenario.from_dict(d)
    return scn


def build_qcl_default() -> Scenario:
    """Construct the shipped cascade-comb descriptor (see configs/)."""
    f_opt = 3.5e12                      # Hz, optical transition
    fsr = 9.94e9                        # Hz target mode spacing
    length = 4.0e-3                     # m
    group_index = c_light / (2 * length * fsr)   # ~3.77
    e_opt = planck * f_opt
    e_inj = e_opt + units.convert(0.5, "meV", "energy")
    mu = 5.8e-28                        # C m (diagonal transition)
    omega_t = units.convert(1.0, "meV", "energy") / hbar
    ps = 1e12
    # scatter[i, j] = rate j -> i with level order (injector, lower, upper)
    scatter = np.array([
        [0.0, 2.0, 0.05],    # -> injector (depopulation 0.5 ps; parasitic)
        [0.08, 0.0, 0.25],   # -> lower    (leak; optical-phonon 4 ps)
        [0.02, 0.03, 0.0],   # -> upper    (backfill)
    ]) * ps
    gp = 2.0e12
    dephasing = np.full((3, 3), gp)
    np.fill_diagonal(dephasing, 0.0)
    system = QuantumSystem(
        energies=np.array([e_inj, 0.0, e_opt]),
        dipole=np.array([[0, 0, 0], [0, 0, mu], [0, mu, 0]], dtype=float),
        tunneling=np.array([[0, 0, omega_t], [0, 0, 0], [omega_t, 0, 0]],
                           dtype=float),
        scatter=scatter, dephasing_p=dephasing,
        carrier_density=2.5e21, period_length=58e-9,
        level_names=("injector", "lower", "upper"))
    eps_r = group_index**2
    facet_r = (group_index - 1.0) / (group_index + 1.0)
    cells = 2000
    round_trip = 2 * group_index * length / c_light
    probes = (
        ProbeSpec("facet", "e_field", position=length, decimate=1),
        ProbeSpec("pop_upper", "population:2", decimate=500),
        ProbeSpec("pop_lower", "population:1", decimate=500),
        ProbeSpec("pop_injector", "population:0", decimate=500),
    )
    return Scenario(
        name="qcl_hfc_3level",
        system=system,
        material=MaterialParams(eps_r=eps_r, sigma=5.0, overlap=1.0),
        length=length, cross_section=4.0e-10, cells=cells,
        left=BoundarySpec("facet", facet_r),
        right=BoundarySpec("facet", facet_r),
        noise=NoiseModel(scheme="full", seed=2024),
        duration=50 * round_trip,
        initial={"kind": "populations", "values": [0.5, 0.15, 0.35]},
        probes=probes,
        notes={
            "free_spectral_range_Hz": fsr,
            "group_index": group_index,
            "round_trip_s": round_trip,
            "operating_point": "80 K, 50 mV/period",
            "rates": "documented estimates pending transport-solver input",
        })
