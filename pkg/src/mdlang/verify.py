"""Self-verification suites: covariance oracles, noise statistics and
solver physics, each producing a machine-readable pass/fail report."""

from __future__ import annotations

import numpy as np
from scipy.constants import c as c_light, hbar

from . import diffusion
from .algebra import COMPONENT_NAMES, CovarianceEngine
from .grid import (BoundarySpec, GridState, MaterialParams, courant_timestep,
                   field_energy, gaussian_pulse, update_e, update_h,
                   apply_boundaries)
from .noise import (FULL_SLOTS, ThreeLevelCoeffs, NoiseModel,
                    full_fluctuation_vector, initial_condition_2lvl,
                    reduced_coherence_noise, reduced_population_noise)
from .propagator import CellPropagator
from .quantum import QuantumSystem


def _check(name, value, tol, extra=None):
    entry = {"check": name, "residual": float(value), "tolerance": float(tol),
             "passed": bool(value <= tol)}
    if extra:
        entry.update(extra)
    return entry


def _random_params(rng, classical=False):
    rates = rng.uniform(0.0, 2.0, (3, 3))
    np.fill_diagonal(rates, 0.0)
    gp = rng.uniform(0.0, 1.0, (3, 3))
    gp = 0.5 * (gp + gp.T)
    np.fill_diagonal(gp, 0.0)
    return diffusion.make_params(
        coupling=rng.uniform(-1, 1), tunneling=rng.uniform(-1, 1),
        rates=rates, gamma_p=gp, kappa=rng.uniform(0, 1),
        n_thermal=rng.uniform(0, 2), classical_field=classical)


def diffusion_suite(samples: int = 1000, seed: int = 0) -> dict:
    """Covariance identities: block templates, closed forms vs the
    derivation engine, factorization B B^T = D, Einstein residuals."""
    rng = np.random.default_rng(seed)
    checks = []

    # block templates against their printed target matrices
    worst = 0.0
    for _ in range(50):
        a, b, c = (rng.standard_normal() + 1j * rng.standard_normal()
                   for _ in range(3))
        for family, args in (("ladder", (a, b, c)), ("population", (a,)),
                             ("cross", (a, b, c)), ("conjugate", (a,))):
            bm, d = diffusion.factor_block(family, *args)
            worst = max(worst, np.abs(bm @ bm.T - d).max())
        bm, d = diffusion.factor_block("population", a, variant="coherence")
        worst = max(worst, np.abs(bm @ bm.T - d).max())
    checks.append(_check("factor_block_templates", worst, 1e-12))

    # transcribed covariance matrix against the derived one
    worst = 0.0
    for _ in range(max(10, samples // 10)):
        params = _random_params(rng)
        engine = CovarianceEngine(params)
        st = diffusion.random_physical_state(rng, field_scale=2.0)
        closed = diffusion.classical_covariance_closed(st, params)
        derived = engine.classical_covariance_matrix(st.evaluator())
        scale = max(np.abs(closed).max(), 1.0)
        worst = max(worst, np.abs(closed - derived).max() / scale)
    checks.append(_check("closed_matrix_vs_derivation", worst, 1e-12,
                         {"resolved_entries": [
                             f"{diffusion.DISPLAY_NAMES[i]},"
                             f"{diffusion.DISPLAY_NAMES[j]}: {why}"
                             for i, j, why in diffusion.RESOLVED_ENTRIES]}))

    # quantum correlations against the engine
    pairs = [("b+", "b"), ("b", "b+"), ("s32", "s23"), ("s23", "s32"),
             ("s13", "s31"), ("s31", "s13"), ("s12", "s21"), ("s21", "s12"),
             ("s33", "s33"), ("s22", "s22"), ("s11", "s11")]
    name2id = {v: k for k, v in COMPONENT_NAMES.items()}
    worst = 0.0
    for _ in range(20):
        params = _random_params(rng)
        engine = CovarianceEngine(params)
        st = diffusion.random_physical_state(rng)
        for p in pairs:
            closed = diffusion.quantum_correlation(p, st, params)
            derived = engine.operator_covariance(name2id[p[0]], name2id[p[1]],
                                                 st.evaluator())
            worst = max(worst, abs(closed - derived))
    checks.append(_check("reservoir_correlations_vs_derivation", worst, 1e-12))

    # full factorization over random physical states
    worst = 0.0
    for _ in range(samples):
        params = _random_params(rng)
        st = diffusion.random_physical_state(rng, field_scale=2.0)
        rep = diffusion.verify_factorization(st, params, tol=1e-10)
        worst = max(worst, rep["max_residual"] / rep["scale"])
    checks.append(_check("noise_matrix_factorization", worst, 1e-10,
                         {"samples": samples}))

    # finite-difference Einstein relation, first order in dt
    params = _random_params(rng)
    st = diffusion.random_physical_state(rng)
    res_coarse = diffusion.einstein_check(("s32", "s23"), st, params, dt=1e-3)
    res_fine = diffusion.einstein_check(("s32", "s23"), st, params, dt=1e-4)
    checks.append(_check("einstein_relation_residual", res_fine, 1e-3,
                         {"coarse_dt_residual": float(res_coarse)}))
    checks.append(_check("einstein_relation_dt_order",
                         abs(res_fine / res_coarse - 0.1), 0.05))

    return {"suite": "diffusion", "passed": all(c["passed"] for c in checks),
            "checks": checks}


def _lasing_test_point():
    """A representative above-threshold state where no amplitude clamps."""
    rates = np.array([[0.0, 2.0, 0.05],
                      [0.1, 0.0, 0.25],
                      [0.05, 0.03, 0.0]]) * 1e12
    gp = np.full((3, 3), 1.3e12)
    np.fill_diagonal(gp, 0.0)
    mu_ul = 3e-28
    omega_t = 1.5e12
    system = QuantumSystem(
        energies=np.array([15.0e-3, 0.0, 14.5e-3]) * 1.602176634e-19,
        dipole=np.array([[0, 0, 0], [0, 0, mu_ul], [0, mu_ul, 0]], float),
        tunneling=np.array([[0, 0, omega_t], [0, 0, 0], [omega_t, 0, 0]], float),
        scatter=rates, dephasing_p=gp, carrier_density=5e21)
    rho = np.array([[0.45, 0.02 - 0.01j, 0.04 + 0.025j],
                    [0.02 + 0.01j, 0.12, 0.05 - 0.035j],
                    [0.04 - 0.025j, 0.05 + 0.035j, 0.43]], complex)
    e_field = 5.0e5
    return system, rho, e_field, omega_t


def noise_stats_suite(samples: int = 100000, seed: int = 5) -> dict:
    """Monte-Carlo second moments of the fluctuation generators against
    their closed-form covariances."""
    samples = max(int(samples), 20000)   # tolerances assume this floor
    rng = np.random.default_rng(seed)
    checks = []

    # reduced-scheme population pair variance
    rho = np.array([[0.3, 0.1 + 0.05j], [0.1 - 0.05j, 0.7]], complex)
    scatter = np.array([[0.0, 0.8], [0.2, 0.0]])
    gamma = np.array([[0.0, 1.1], [1.1, 0.0]])
    n_cell = 1e4
    xi = rng.standard_normal(samples)
    kick, _ = reduced_population_noise(1, 0, rho, scatter, n_cell, xi)
    expected = (scatter[0, 1] * rho[1, 1].real
                + scatter[1, 0] * rho[0, 0].real) / n_cell
    rel = abs(np.mean(kick**2) - expected) / expected
    checks.append(_check("reduced_population_variance", rel, 0.05))

    xi2 = rng.standard_normal(samples)
    xi3 = rng.standard_normal(samples)
    kick, _ = reduced_coherence_noise(1, 0, rho, scatter, gamma, n_cell, xi2, xi3)
    rad = ((-scatter[:, 0].sum() * rho[0, 0].real
            + scatter[0, 1] * rho[1, 1].real
            + 2 * gamma[1, 0] * rho[0, 0].real) / (2 * n_cell))
    rel = abs(np.mean(np.abs(kick)**2) - 2 * rad) / (2 * rad)
    checks.append(_check("reduced_coherence_variance", rel, 0.05))

    # full-scheme moments against the covariance matrix at a lasing point
    system, rho3, e_field, omega_t = _lasing_test_point()
    coeffs = ThreeLevelCoeffs.from_system(system)
    psi = -coeffs.dipole_ul * e_field / hbar
    params = diffusion.make_params(coupling=psi, tunneling=omega_t,
                                   rates=coeffs.rates,
                                   gamma_p=system.dephasing_p,
                                   classical_field=True)
    target = diffusion.classical_covariance_closed(
        diffusion.CNumberState(rho3, 1.0 + 0.0j), params)
    m = max(samples, 100000)
    draws = rng.standard_normal((m, FULL_SLOTS))
    f, clamps = full_fluctuation_vector(
        np.broadcast_to(rho3, (m, 3, 3)).copy(), coeffs, omega_t,
        np.full(m, e_field), 1.0, draws)
    slots = {2: (1, 2), 3: (2, 0), 4: (1, 0), 5: (2, 2), 6: (1, 1),
             7: (0, 0), 8: (0, 1), 9: (0, 2), 10: (2, 1)}
    vals = {k: f[:, i, j] for k, (i, j) in slots.items()}
    worst_z = 0.0
    for a in range(2, 11):
        for b in range(a, 11):
            prod = vals[a] * vals[b]
            emp = prod.mean()
            se_re = max(prod.real.std() / np.sqrt(m), 1e-300)
            se_im = max(prod.imag.std() / np.sqrt(m), 1e-300)
            diff = emp - target[a, b]
            worst_z = max(worst_z, abs(diff.real) / se_re,
                          abs(diff.imag) / se_im)
    checks.append(_check("full_scheme_moments_zscore", worst_z, 4.0,
                         {"draws": m, "clamped": clamps}))
    checks.append(_check("full_scheme_clamps_at_test_point", clamps, 0))

    # draw independence across slots (discrete delta correlation)
    d = rng.standard_normal((samples, 8))
    corr = np.corrcoef(d.T) - np.eye(8)
    checks.append(_check("draw_cross_correlation", np.abs(corr).max(),
                         5.0 / np.sqrt(samples)))

    # tipping-angle statistics
    n_cell = 1e4
    rho0 = initial_condition_2lvl(n_cell, np.random.default_rng(seed + 1),
                                  (samples,))
    theta_sq = 4 * rho0[..., 0, 0].real.mean()  # sin^2(theta/2) ~ theta^2/4
    rel = abs(theta_sq - 4.0 / n_cell) / (4.0 / n_cell)
    checks.append(_check("tipping_angle_variance", rel, 0.05))

    return {"suite": "noise-stats",
            "passed": all(c["passed"] for c in checks), "checks": checks}


def solver_suite(samples: int | None = None, seed: int = 3) -> dict:
    """Field and matter propagation oracles (fast versions; ``samples``
    is accepted for interface uniformity and unused)."""
    checks = []

    # free-space pulse speed
    mat = MaterialParams()
    cells, dx = 2400, 1e-7
    dt = courant_timestep(dx, 1.0, 0.999)
    state = GridState.allocate(cells, dx, dt, mat)
    gaussian_pulse(state, mat, center=40e-6, width=6e-6)
    n_steps = 400
    for k in range(n_steps):
        update_h(state, mat)
        e1, em = state.e[..., 1].copy(), state.e[..., -2].copy()
        update_e(state, mat)
        apply_boundaries(state, mat, BoundarySpec("absorb"),
                         BoundarySpec("absorb"), e1, em)
    x = np.arange(cells + 1) * dx
    peak = x[np.argmax(np.abs(state.e))]
    speed = (peak - 40e-6) / (n_steps * dt)
    checks.append(_check("free_space_pulse_speed", abs(speed / c_light - 1), 0.01))

    # energy conservation with reflecting walls (5e4 steps, fast variant)
    state = GridState.allocate(512, dx, courant_timestep(dx, 1.0, 0.95), mat)
    gaussian_pulse(state, mat, center=25.6e-6, width=3e-6)
    h_prev = state.h.copy()
    update_h(state, mat)
    e0 = field_energy(state, mat, h_prev)
    drift = 0.0
    for k in range(50000):
        e1, em = state.e[..., 1].copy(), state.e[..., -2].copy()
        update_e(state, mat)
        apply_boundaries(state, mat, BoundarySpec("reflect"),
                         BoundarySpec("reflect"), e1, em)
        h_prev = state.h.copy()
        update_h(state, mat)
        if (k + 1) % 5000 == 0:
            drift = max(drift, abs(field_energy(state, mat, h_prev) / e0 - 1))
    checks.append(_check("field_energy_conservation", drift, 1e-6))

    # two-level Rabi oscillation against the rotating-wave formula
    from .quantum import QuantumSystem as QS
    omega0 = 2 * np.pi * 3e13
    mu = 1e-29
    e0_drive = 2e7
    rabi = mu * e0_drive / hbar
    system = QS(energies=np.array([0.0, hbar * omega0]),
                dipole=np.array([[0, mu], [mu, 0.0]]),
                tunneling=np.zeros((2, 2)), scatter=np.zeros((2, 2)),
                dephasing_p=np.zeros((2, 2)), carrier_density=1e20)
    dt = 2 * np.pi / omega0 / 50
    prop = CellPropagator(system, dt)
    rho = np.zeros((2, 2), complex)
    rho[0, 0] = 1.0
    n_steps = int(round(2 * np.pi / rabi * 3 / dt))
    pops = np.empty(n_steps)
    for k in range(n_steps):
        field_now = e0_drive * np.cos(omega0 * (k + 0.5) * dt)
        rho = prop.full_step(rho, field_now)
        pops[k] = rho[1, 1].real
    # Rabi frequency from the excited-population oscillation via FFT peak
    spec = np.abs(np.fft.rfft(pops - pops.mean()))
    freqs = np.fft.rfftfreq(n_steps, dt) * 2 * np.pi
    k0 = np.argmax(spec)
    num = (spec[k0 - 1] - spec[k0 + 1])
    den = (spec[k0 - 1] - 2 * spec[k0] + spec[k0 + 1])
    shift = 0.5 * num / den if den != 0 else 0.0
    measured = freqs[k0] + shift * (freqs[1] - freqs[0])
    checks.append(_check("two_level_rabi_frequency",
                         abs(measured / rabi - 1), 0.01))

    return {"suite": "solver", "passed": all(c["passed"] for c in checks),
            "checks": checks}


SUITES = {"diffusion": diffusion_suite, "noise-stats": noise_stats_suite,
          "solver": solver_suite}


def render_report(report: dict) -> str:
    lines = [f"suite: {report['suite']}  "
             f"{'PASS' if report['passed'] else 'FAIL'}"]
    for c in report["checks"]:
        status = "pass" if c["passed"] else "FAIL"
        lines.append(f"  [{status}] {c['check']}: residual {c['residual']:.3e}"
                     f" (tol {c['tolerance']:.3e})")
    return "\n".join(lines)
