"""Deterministic simulation loop: field updates, matter updates, probes
and invariant monitoring.

Per step (order fixed):

    1. advance H from the E curl
    2. advance interior E using the previous matter step's dP/dt
    3. characteristic facet update (uses pre-update neighbor values)
    4. matter full step with the fresh cell field (splitting + kick)
    5. refresh the quantum polarization and sample probes

Probes sample after the complete step, so recorded quantities include
the fluctuation kick.  All state supports leading batch dimensions
(independent trajectories advanced in lockstep); draws come from
counter-based streams, so a run is reproducible from (config, seed)
alone regardless of worker-thread settings.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .grid import (GridState, apply_boundaries, cell_field, courant_timestep,
                   update_e, update_h)
from .noise import NoiseStreams, initial_condition_2lvl
from .propagator import CellPropagator
from .quantum import ConfigError, min_eigenvalue, polarization, trace_error
from .scenarios import Scenario, bloch_vector_metric


class InvariantViolation(RuntimeError):
    """A physicality invariant failed mid-run (NaN field, trace drift,
    positivity floor)."""


@dataclass
class RunDiagnostics:
    steps: int = 0
    wall_time: float = 0.0
    clamp_events: int = 0
    draw_count: int = 0
    max_trace_error: float = 0.0
    min_eigenvalue: float = 0.0
    checks: int = 0

    @property
    def clamp_rate(self) -> float:
        return self.clamp_events / self.draw_count if self.draw_count else 0.0


class Probe:
    """Collects one configured quantity, decimated, in memory and/or
    streamed through a writer."""

    def __init__(self, spec, scenario: Scenario, writer=None, out_name=None):
        self.spec = spec
        self.dx = scenario.dx
        self.node = None
        if spec.needs_position():
            self.node = int(round(spec.position / scenario.dx))
        self.samples: list = []
        self.writer = writer
        self.out_name = out_name
        self._chunk: list = []

    def sample(self, state: GridState, step: int) -> None:
        if step % self.spec.decimate:
            return
        value = self._evaluate(state)
        self.samples.append(value)
        if self.writer is not None:
            self._chunk.append(value)
            if len(self._chunk) >= 4096:
                self.flush()

    def flush(self) -> None:
        if self.writer is not None and self._chunk:
            self.writer.submit(self.out_name, np.asarray(self._chunk))
            self._chunk = []

    def _evaluate(self, state: GridState):
        kind = self.spec.kind
        if kind == "e_field":
            return np.array(state.e[..., self.node])
        if kind == "h_field":
            k = min(self.node, state.h.shape[-1] - 1)
            return np.array(state.h[..., k])
        if kind == "poynting":
            k = self.node
            h_lo = state.h[..., max(k - 1, 0)]
            h_hi = state.h[..., min(k, state.h.shape[-1] - 1)]
            return np.array(-state.e[..., k] * 0.5 * (h_lo + h_hi))
        if kind.startswith("population:"):
            idx = int(kind.split(":")[1])
            return np.array(state.rho[..., idx, idx].real.mean(axis=-1))
        if kind == "inversion":
            inv = (state.rho[..., 1, 1] - state.rho[..., 0, 0]).real
            return np.array(inv.mean(axis=-1))
        if kind == "bloch_ratio":
            _, _, _, ratio = bloch_vector_metric(state.rho)
            return np.array(np.nanmean(ratio, axis=-1))
        if kind.startswith("coherence:"):
            i, j = (int(x) for x in kind.split(":")[1].split(","))
            return np.array(np.abs(state.rho[..., i, j]).mean(axis=-1))
        raise ConfigError(f"unknown probe kind {kind!r}")

    def record(self, dt: float):
        """In-memory samples as a TraceRecord-compatible bundle."""
        from .analysis import TraceRecord
        data = np.asarray(self.samples)
        if data.ndim > 1 or data.size < 2:
            return data  # batched runs (steps, *batch) or too-short records
        return TraceRecord(data=data, dt=dt * self.spec.decimate,
                           quantity=self.spec.kind, probe=self.spec.name,
                           unit="V/m" if self.spec.kind == "e_field" else "")


@dataclass
class RunResult:
    diagnostics: RunDiagnostics
    probes: dict
    state: GridState
    dt: float
    snapshots: list = field(default_factory=list)


class Simulation:
    """Owns the mutable state of one run."""

    def __init__(self, scenario: Scenario, seed: int | None = None,
                 batch_shape=(), writer=None,
                 positivity_floor: float = -1e-5,
                 trace_tolerance: float = 1e-9,
                 check_every: int = 200):
        self.scenario = scenario
        self.seed = scenario.noise.seed if seed is None else int(seed)
        self.batch_shape = tuple(batch_shape)
        mat = scenario.material
        self.dt = courant_timestep(scenario.dx, mat.refractive_index,
                                   scenario.stability)
        self.state = GridState.allocate(scenario.cells, scenario.dx, self.dt,
                                        mat, scenario.system.num_levels,
                                        self.batch_shape)
        self.propagator = CellPropagator(scenario.system, self.dt, scenario.noise)
        self.streams = NoiseStreams(self.seed)
        self.n_cell = scenario.n_cell
        self.positivity_floor = positivity_floor
        self.trace_tolerance = trace_tolerance
        self.check_every = check_every
        self.sources: list = []      # (node, callable(t) -> field increment)
        if writer is not None and self.batch_shape:
            raise ConfigError("file-backed traces support unbatched runs only")
        self.writer = writer
        self.probes = [Probe(p, scenario, writer, p.name) for p in scenario.probes]
        self._init_matter()

    def _init_matter(self) -> None:
        scn = self.scenario
        rho = self.state.rho
        init = scn.initial
        kind = init.get("kind", "populations")
        if kind == "tipped_inversion":
            if scn.system.num_levels != 2:
                raise ConfigError("tipped inversion needs a two-level system")
            shape = self.batch_shape + (scn.cells,)
            rho[...] = initial_condition_2lvl(self.n_cell,
                                              self.streams.init_generator(),
                                              shape)
        elif kind == "populations":
            values = init.get("values")
            if values is None:
                values = np.zeros(scn.system.num_levels)
                values[0] = 1.0
            if len(values) != scn.system.num_levels:
                raise ConfigError("initial populations length mismatch")
            if abs(sum(values) - 1.0) > 1e-12:
                raise ConfigError("initial populations must sum to 1")
            for k, v in enumerate(values):
                rho[..., k, k] = v
        else:
            raise ConfigError(f"unknown initial condition {kind!r}")
        self.state.p_qm = polarization(scn.system, rho)
        self.state.p_qm_prev = self.state.p_qm.copy()

    @property
    def n_steps(self) -> int:
        return int(round(self.scenario.duration / self.dt))

    def step(self, step_index: int) -> None:
        st = self.state
        scn = self.scenario
        mat = scn.material
        update_h(st, mat)
        e1_old = np.array(st.e[..., 1])
        em_old = np.array(st.e[..., -2])
        dp = (st.p_qm - st.p_qm_prev) / self.dt
        update_e(st, mat, dp)
        apply_boundaries(st, mat, scn.left, scn.right, e1_old, em_old)
        for node, fn in self.sources:
            st.e[..., node] += fn(step_index * self.dt)
        e_cells = cell_field(st.e)
        draws = None
        if self.propagator.draw_slots:
            draws = self.streams.step_normals(
                step_index, self.batch_shape + (scn.cells,
                                                self.propagator.draw_slots))
        st.rho, p_new = self.propagator.matter_step(st.rho, e_cells,
                                                    self.n_cell, draws)
        st.p_qm_prev = st.p_qm
        st.p_qm = p_new

    def _check_invariants(self, diag: RunDiagnostics, step: int) -> None:
        st = self.state
        if not np.isfinite(st.e).all() or not np.isfinite(st.h).all():
            raise InvariantViolation(f"non-finite field at step {step}")
        terr = float(trace_error(st.rho).max())
        diag.max_trace_error = max(diag.max_trace_error, terr)
        if terr > self.trace_tolerance:
            raise InvariantViolation(
                f"density-matrix trace error {terr:.3e} at step {step}")
        ev = float(min_eigenvalue(st.rho).min())
        diag.min_eigenvalue = min(diag.min_eigenvalue, ev)
        if ev < self.positivity_floor:
            raise InvariantViolation(
                f"density-matrix eigenvalue {ev:.3e} below the "
                f"{self.positivity_floor:.1e} floor at step {step}")
        diag.checks += 1

    def run(self, n_steps: int | None = None, snapshot_every: int | None = None,
            progress: bool = False) -> RunResult:
        n = self.n_steps if n_steps is None else int(n_steps)
        snap_every = (self.scenario.snapshot_every if snapshot_every is None
                      else snapshot_every)
        diag = RunDiagnostics()
        snapshots = []
        start = time.perf_counter()
        for k in range(n):
            self.step(k)
            for probe in self.probes:
                probe.sample(self.state, k)
            if snap_every and (k + 1) % snap_every == 0:
                snapshots.append({"step": k + 1,
                                  "e": self.state.e.copy(),
                                  "h": self.state.h.copy(),
                                  "rho": self.state.rho.copy()})
            if (k + 1) % self.check_every == 0 or k + 1 == n:
                self._check_invariants(diag, k + 1)
            if progress and (k + 1) % max(1, n // 20) == 0:
                print(f"  step {k + 1}/{n}", flush=True)
        for probe in self.probes:
            probe.flush()
        diag.steps = n
        diag.wall_time = time.perf_counter() - start
        diag.clamp_events = self.propagator.clamp_events
        diag.draw_count = self.propagator.draw_count
        probes = {p.spec.name: p.record(self.dt) for p in self.probes}
        return RunResult(diagnostics=diag, probes=probes, state=self.state,
                         dt=self.dt, snapshots=snapshots)
