"""Command-line entry points.

Subcommands: ``run`` (execute a scenario file), ``analyze`` (turn traces
into spectra / instantaneous frequency / RIN / filtered envelopes),
``verify`` (self-verification suites) and ``schema`` (print the scenario
file schema).  Exit codes: 0 ok, 2 configuration error, 3 invariant
violation during a run, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, units
from .analysis import (TraceError, bandpass_extract, instantaneous_frequency,
                       intensity_spectrum, power_trace, rf_spectrum,
                       rin_spectrum)
from .quantum import ConfigError
from .runner import InvariantViolation, Simulation
from .scenarios import Scenario
from .traceio import (TraceWriter, config_digest, read_trace, write_manifest,
                      write_trace, export_text)
from .verify import SUITES, render_report

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_VERIFY = 0, 2, 3, 4


def _cmd_run(args) -> int:
    try:
        scenario = Scenario.load(args.config)
    except (ConfigError, KeyError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    duration = scenario.duration
    if args.duration_override:
        try:
            duration = units.parse_duration(args.duration_override)
        except (ValueError, units.UnitError) as exc:
            print(f"config error: bad duration override: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    writer = TraceWriter()
    seed = scenario.noise.seed if args.seed is None else args.seed
    try:
        sim = Simulation(scenario, seed=seed, writer=writer)
        for probe in sim.probes:
            writer.open_trace(
                probe.spec.name, out / f"{probe.spec.name}.trace",
                dt=sim.dt * probe.spec.decimate, t0=0.0,
                quantity=probe.spec.kind, probe=probe.spec.name,
                unit="V/m" if probe.spec.kind == "e_field" else "")
        n_steps = int(round(duration / sim.dt))
        start = time.time()
        status, failure = EXIT_OK, None
        try:
            result = sim.run(n_steps=n_steps, progress=not args.quiet)
            diag = result.diagnostics
            for k, snap in enumerate(result.snapshots):
                np.savez(out / f"snapshot_{snap['step']:09d}.npz",
                         e=snap["e"], h=snap["h"], rho=snap["rho"])
        except InvariantViolation as exc:
            failure = str(exc)
            status = EXIT_INVARIANT
            diag = None
            for probe in sim.probes:   # retain partial artifacts
                probe.flush()
        writer.close()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = {
        "package_version": __version__,
        "numpy_version": np.__version__,
        "config": scenario.to_dict(),
        "config_sha256": config_digest(scenario.to_dict()),
        "seed": seed,
        "threads": args.threads or os.environ.get("MDLANG_THREADS", ""),
        "n_steps": n_steps,
        "dt": sim.dt,
        "wall_time_s": time.time() - start,
        "traces": [p.spec.name + ".trace" for p in sim.probes],
        "failure": failure,
    }
    if diag is not None:
        manifest.update({
            "clamp_events": diag.clamp_events,
            "draw_count": diag.draw_count,
            "clamp_rate": diag.clamp_rate,
            "max_trace_error": diag.max_trace_error,
            "min_eigenvalue": diag.min_eigenvalue,
        })
    write_manifest(out / "run_manifest.json", manifest)
    if failure:
        print(f"invariant violation: {failure}", file=sys.stderr)
        print(f"partial artifacts retained in {out}", file=sys.stderr)
    elif not args.quiet:
        print(f"completed {n_steps} steps; artifacts in {out}")
    return status


def _write_spectrum(path, result, provenance: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# mdlang spectrum\n")
        for key, val in provenance.items():
            fh.write(f"# {key}={val}\n")
        fh.write(f"# resolution_bandwidth_Hz={result.resolution_bandwidth!r}\n")
        fh.write(f"# window={result.window} sidedness={result.sidedness} "
                 f"unit={result.unit}\n")
        for f, v in zip(result.frequency, result.value):
            fh.write(f"{float(f)!r}\t{float(v)!r}\n")


def _cmd_analyze(args) -> int:
    try:
        trace = read_trace(args.trace)
    except (TraceError, OSError) as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else Path(args.trace).with_suffix(
        f".{args.what}.txt")
    provenance = {"input": str(args.trace), "subcommand": args.what,
                  "package_version": __version__}
    try:
        if args.what == "spectrum":
            _write_spectrum(out, intensity_spectrum(trace, args.window), provenance)
        elif args.what == "rf":
            power = power_trace(trace, cutoff=args.cutoff) \
                if trace.quantity != "power" else trace
            _write_spectrum(out, rf_spectrum(power, args.window), provenance)
        elif args.what == "rin":
            power = power_trace(trace, cutoff=args.cutoff) \
                if trace.quantity != "power" else trace
            _write_spectrum(out, rin_spectrum(power), provenance)
        elif args.what == "instfreq":
            t, f, valid = instantaneous_frequency(trace)
            with open(out, "w", encoding="utf-8") as fh:
                fh.write("# mdlang instantaneous frequency\n")
                for key, val in provenance.items():
                    fh.write(f"# {key}={val}\n")
                for ti, fi, vi in zip(t, f, valid):
                    fh.write(f"{float(ti)!r}\t{float(fi)!r}\t{int(vi)}\n")
        elif args.what == "filter":
            if args.f_center is None or args.bandwidth is None:
                print("filter needs --f-center and --bandwidth", file=sys.stderr)
                return EXIT_CONFIG
            env = bandpass_extract(trace, args.f_center, args.bandwidth)
            write_trace(out.with_suffix(".trace"), env)
        elif args.what == "export":
            export_text(args.trace, trace, out)
        else:  # pragma: no cover - argparse guards the choices
            return EXIT_CONFIG
    except TraceError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    report = SUITES[args.suite](args.samples) if args.samples else \
        SUITES[args.suite]()
    print(render_report(report))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, default=str)
            fh.write("\n")
    return EXIT_OK if report["passed"] else EXIT_VERIFY


_SCHEMA_TEXT = """\
Scenario file (JSON, schema_version 1).  Every physical quantity is a
mapping {"value": <number>, "unit": "<unit>"}.

{
  "schema_version": 1,
  "name": "...",
  "levels": [{"name": "g", "energy": {"value": 0, "unit": "meV"}}, ...],
  "dipole": [{"levels": ["g", "e"], "moment": {"value": ..., "unit": "C m"}}],
  "tunneling": [{"levels": ["a", "b"],
                 "coupling": {"value": ..., "unit": "meV" | "rad/s"}}],
  "scattering": [{"from": "e", "to": "g", "rate": {"value": ..., "unit": "1/s"}}],
  "pure_dephasing": [{"levels": ["g", "e"], "rate": {...}}],
  "carrier_density": {"value": ..., "unit": "1/m^3"},
  "period_length": {"value": ..., "unit": "m"},
  "material": {"eps_r": 1.0, "chi": 0.0,
               "sigma": {"value": 0, "unit": "S/m"}, "overlap": 1.0},
  "geometry": {"length": {...}, "cross_section": {...}, "cells": <int>},
  "boundaries": {"left": {"kind": "reflect" | "absorb" | "facet",
                          "reflectivity": 0.58}, "right": {...}},
  "noise": {"scheme": "off" | "reduced" | "full", "seed": <int>,
            "n_cell": "derived" | <number>},
  "initial": {"kind": "populations", "values": [...]}
           | {"kind": "tipped_inversion"},
  "duration": {"value": ..., "unit": "ns"},
  "stability": 1.0,
  "probes": [{"name": "facet", "kind": "e_field",
              "position": {"value": ..., "unit": "m"}, "decimate": 1}],
  "snapshot_every": 0
}

Probe kinds: e_field, h_field, poynting (need a position); inversion,
bloch_ratio, population:<index>, coherence:<i>,<j> (medium averages).
"""


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mdlang",
        description="1D field/density-matrix solver with Langevin noise")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None,
                       help="recorded in the manifest; the vectorized engine "
                            "is bit-identical for any setting")
    p_run.add_argument("--duration-override", default=None,
                       help='e.g. "1ps" or "2.5 ns"')
    p_run.add_argument("--out", default="mdlang_out")
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_an = sub.add_parser("analyze", help="post-process a trace file")
    p_an.add_argument("what", choices=["spectrum", "rf", "rin", "instfreq",
                                       "filter", "export"])
    p_an.add_argument("trace")
    p_an.add_argument("--window", default="hann")
    p_an.add_argument("--cutoff", type=float, default=1e12,
                      help="detector low-pass for power traces (Hz)")
    p_an.add_argument("--f-center", type=float, default=None)
    p_an.add_argument("--bandwidth", type=float, default=None)
    p_an.add_argument("--out", default=None)
    p_an.set_defaults(func=_cmd_analyze)

    p_ver = sub.add_parser("verify", help="run a self-verification suite")
    p_ver.add_argument("--suite", choices=sorted(SUITES), required=True)
    p_ver.add_argument("--samples", type=int, default=None)
    p_ver.add_argument("--json", default=None)
    p_ver.set_defaults(func=_cmd_verify)

    p_sch = sub.add_parser("schema", help="print the scenario file schema")
    p_sch.set_defaults(func=lambda args: print(_SCHEMA_TEXT) or EXIT_OK)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
