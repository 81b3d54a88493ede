"""Unit handling for configuration files.

Every quantity in a scenario file is written as ``{"value": x, "unit": "ps"}``
so that configs are self-describing.  This module converts such quantities to
SI floats and checks that the unit has the expected dimension.
"""

from __future__ import annotations

import numpy as np
from scipy.constants import e as elementary_charge, hbar

# unit -> (SI factor, dimension tag)
_DEBYE = 3.33564e-30  # C m

UNIT_TABLE = {
    # time
    "s": (1.0, "time"), "ms": (1e-3, "time"), "us": (1e-6, "time"),
    "ns": (1e-9, "time"), "ps": (1e-12, "time"), "fs": (1e-15, "time"),
    # length
    "m": (1.0, "length"), "cm": (1e-2, "length"), "mm": (1e-3, "length"),
    "um": (1e-6, "length"), "nm": (1e-9, "length"),
    # area
    "m^2": (1.0, "area"), "cm^2": (1e-4, "area"), "um^2": (1e-12, "area"),
    # frequency (cyclic) and angular rate
    "Hz": (1.0, "frequency"), "kHz": (1e3, "frequency"), "MHz": (1e6, "frequency"),
    "GHz": (1e9, "frequency"), "THz": (1e12, "frequency"),
    "rad/s": (1.0, "angular_rate"), "rad/ps": (1e12, "angular_rate"),
    # rates
    "1/s": (1.0, "rate"), "1/ms": (1e3, "rate"), "1/us": (1e6, "rate"),
    "1/ns": (1e9, "rate"), "1/ps": (1e12, "rate"), "1/fs": (1e15, "rate"),
    # energy
    "J": (1.0, "energy"), "eV": (elementary_charge, "energy"),
    "meV": (1e-3 * elementary_charge, "energy"),
    # dipole moment
    "C m": (1.0, "dipole"), "C*m": (1.0, "dipole"), "D": (_DEBYE, "dipole"),
    "e nm": (elementary_charge * 1e-9, "dipole"),
    # density
    "1/m^3": (1.0, "density"), "1/cm^3": (1e6, "density"),
    # field
    "V/m": (1.0, "field"), "kV/m": (1e3, "field"), "MV/m": (1e6, "field"),
    "kV/cm": (1e5, "field"),
    # conductivity
    "S/m": (1.0, "conductivity"),
    # temperature
    "K": (1.0, "temperature"),
    # dimensionless
    "": (1.0, "none"), "1": (1.0, "none"),
}


class UnitError(ValueError):
    """Raised for unknown units or dimension mismatches."""


def convert(value: float, unit: str, expect: str | None = None) -> float:
    """Convert ``value`` with unit string ``unit`` to SI."""
    try:
        factor, dim = UNIT_TABLE[unit]
    except KeyError:
        raise UnitError(f"unknown unit {unit!r}") from None
    if expect is not None and dim != expect:
        raise UnitError(f"unit {unit!r} has dimension {dim!r}, expected {expect!r}")
    return float(value) * factor


def quantity(q, expect: str | None = None) -> float:
    """Parse a ``{"value": x, "unit": u}`` mapping (or bare number) to SI."""
    if isinstance(q, dict):
        if "value" not in q or "unit" not in q:
            raise UnitError(f"quantity needs 'value' and 'unit' keys, got {q!r}")
        return convert(q["value"], q["unit"], expect)
    if expect not in (None, "none"):
        raise UnitError(f"bare number {q!r} where a {expect!r} quantity is required")
    return float(q)


def as_angular_rate(q) -> float:
    """Parse a coupling given either as angular rate or as an energy (divided by hbar)."""
    if isinstance(q, dict):
        _, dim = UNIT_TABLE.get(q.get("unit", None), (None, None))
        if dim == "energy":
            return quantity(q, "energy") / hbar
        if dim == "frequency":
            return 2.0 * np.pi * quantity(q, "frequency")
        return quantity(q, "angular_rate")
    return float(q)


def parse_duration(text: str) -> float:
    """Parse strings like ``"1ps"`` or ``"2.5 us"`` to seconds (CLI overrides)."""
    s = text.strip()
    for unit in sorted((u for u, (_, d) in UNIT_TABLE.items() if d == "time"),
                       key=len, reverse=True):
        if unit and s.endswith(unit):
            return convert(float(s[: -len(unit)].strip()), unit, "time")
    return float(s)
