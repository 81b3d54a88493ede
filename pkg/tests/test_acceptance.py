"""Acceptance criteria.

Each test implements one acceptance criterion at its stated tolerance
and prints a single pass/fail line.  The full-scale comb figures (hours
of runtime) are replaced by the documented desk-scale substitute runs;
``scripts/run_hfc_full.py`` reproduces the long-run figures given the
compute time.

Several statistics-based checks use frozen seeds: the assertions are
exact for those seeds and representative for any other.
"""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.constants import c as c_light, hbar

from mdlang.analysis import (TraceRecord, intensity_spectrum, mode_spacing,
                             rin_spectrum)
from mdlang.diffusion import (CNumberState, classical_covariance_closed,
                              factor_block, make_params, random_physical_state,
                              verify_factorization)
from mdlang.grid import (BoundarySpec, GridState, MaterialParams,
                         apply_boundaries, courant_timestep, field_energy,
                         gaussian_pulse, update_e, update_h)
from mdlang.noise import (FULL_SLOTS, ThreeLevelCoeffs, full_fluctuation_vector,
                          reduced_coherence_noise, reduced_population_noise)
from mdlang.propagator import CellPropagator
from mdlang.quantum import QuantumSystem
from mdlang.runner import Simulation
from mdlang.scenarios import qcl_hfc_scenario, superfluorescence_scenario

REPO = Path(__file__).resolve().parents[1]


def report(criterion: str, passed: bool, detail: str) -> None:
    print(f"\n[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


# ---------------------------------------------------------------------------
# 1. solver oracles
# ---------------------------------------------------------------------------

class TestCriterion1SolverOracles:
    def test_free_space_pulse_speed(self):
        mat = MaterialParams()
        dx = 1e-7
        dt = courant_timestep(dx, 1.0, 0.9995)
        st = GridState.allocate(2600, dx, dt, mat)
        wavelength = 20 * dx  # 20 cells per wavelength
        gaussian_pulse(st, mat, center=40e-6, width=6e-6,
                       carrier_frequency=c_light / wavelength)
        n = 600
        for _ in range(n):
            update_h(st, mat)
            e1, em = np.array(st.e[1]), np.array(st.e[-2])
            update_e(st, mat)
            apply_boundaries(st, mat, BoundarySpec("absorb"),
                             BoundarySpec("absorb"), e1, em)
        x = np.arange(st.e.size) * dx
        env = st.e**2
        peak = (x * env).sum() / env.sum()
        err = abs((peak - 40e-6) / (n * dt) / c_light - 1)
        report("1a free-space pulse speed (20 cells/wavelength)", err < 0.01,
               f"relative error {err:.2e} (tol 1e-2)")
        assert err < 0.01

    def test_energy_conservation_1e5_steps(self):
        mat = MaterialParams()
        dx = 1e-7
        st = GridState.allocate(512, dx, courant_timestep(dx, 1.0, 0.97), mat)
        gaussian_pulse(st, mat, center=25.6e-6, width=3e-6)
        h_prev = st.h.copy()
        update_h(st, mat)
        e0 = field_energy(st, mat, h_prev)
        worst = 0.0
        for k in range(100000):
            e1, em = np.array(st.e[1]), np.array(st.e[-2])
            update_e(st, mat)
            apply_boundaries(st, mat, BoundarySpec("reflect"),
                             BoundarySpec("reflect"), e1, em)
            h_prev = st.h.copy()
            update_h(st, mat)
            if (k + 1) % 5000 == 0:
                worst = max(worst, abs(field_energy(st, mat, h_prev) / e0 - 1))
        report("1b field energy over 1e5 lossless steps", worst < 1e-6,
               f"max relative drift {worst:.2e} (tol 1e-6)")
        assert worst < 1e-6

    def test_rabi_frequency_10_periods(self):
        omega0 = 2 * np.pi * 3e13
        mu, e0 = 1e-29, 2e7
        rabi = mu * e0 / hbar
        sysm = QuantumSystem(
            energies=np.array([0.0, hbar * omega0]),
            dipole=np.array([[0.0, mu], [mu, 0.0]]),
            tunneling=np.zeros((2, 2)), scatter=np.zeros((2, 2)),
            dephasing_p=np.zeros((2, 2)), carrier_density=1e20)
        dt = 2 * np.pi / omega0 / 50
        prop = CellPropagator(sysm, dt)
        rho = np.diag([1.0, 0.0]).astype(complex)
        n_steps = int(round(2 * np.pi / rabi * 10 / dt))
        pops = np.empty(n_steps)
        for k in range(n_steps):
            rho = prop.full_step(rho, e0 * np.cos(omega0 * (k + 0.5) * dt))
            pops[k] = rho[1, 1].real
        spec = np.abs(np.fft.rfft(pops - pops.mean()))
        freqs = np.fft.rfftfreq(n_steps, dt) * 2 * np.pi
        k0 = spec.argmax()
        den = spec[k0 - 1] - 2 * spec[k0] + spec[k0 + 1]
        shift = 0.5 * (spec[k0 - 1] - spec[k0 + 1]) / den
        measured = freqs[k0] + shift * (freqs[1] - freqs[0])
        err = abs(measured / rabi - 1)
        report("1c two-level Rabi frequency over 10 periods", err < 0.01,
               f"mu E0/hbar relative error {err:.2e} (tol 1e-2)")
        assert err < 0.01

    def test_global_second_order_convergence(self):
        omega0 = 2 * np.pi * 2e13
        sysm = QuantumSystem(
            energies=np.array([0.0, hbar * omega0]),
            dipole=np.array([[0.0, 1e-29], [1e-29, 0.0]]),
            tunneling=np.zeros((2, 2)),
            scatter=np.array([[0.0, 2e10], [0.0, 0.0]]),
            dephasing_p=np.array([[0.0, 1e10], [1e10, 0.0]]),
            carrier_density=1e20)
        e0 = 1e7
        t_total = 2 * np.pi / omega0 * 40

        def solve(dt):
            prop = CellPropagator(sysm, dt, use_kernels=False)
            rho = np.diag([1.0, 0.0]).astype(complex)
            for k in range(int(round(t_total / dt))):
                rho = prop.full_step(rho, e0 * np.cos(omega0 * (k + 0.5) * dt))
            return rho

        dt0 = 2 * np.pi / omega0 / 32
        ref = solve(dt0 / 16)
        errs = [np.abs(solve(dt0 / f) - ref).max() for f in (1, 2, 4)]
        r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
        ok = abs(r1 - 4) < 1.0 and abs(r2 - 4) < 1.4
        report("1d global 2nd-order dt convergence", ok,
               f"halving-dt error ratios {r1:.2f}, {r2:.2f} (expect 4)")
        assert ok


# ---------------------------------------------------------------------------
# 2. physicality under noise
# ---------------------------------------------------------------------------

class TestCriterion2Physicality:
    def test_thousand_noisy_trajectories(self):
        scn = superfluorescence_scenario(cells=24, length=6e-6)
        sim = Simulation(scn, seed=11, batch_shape=(1000,), check_every=10,
                         positivity_floor=-1e-5)
        res = sim.run(n_steps=10000)
        d = res.diagnostics
        ok = (d.max_trace_error < 1e-9 and d.min_eigenvalue >= -1e-7
              and d.clamp_rate < 1e-3)
        report("2 physicality over 1000 noisy trajectories", ok,
               f"|trace-1| max {d.max_trace_error:.2e} (tol 1e-9); "
               f"min eigenvalue {d.min_eigenvalue:.2e} (floor -1e-7); "
               f"clamp rate {d.clamp_rate:.2e} of {d.draw_count} draws "
               f"(tol 1e-3)")
        assert d.max_trace_error < 1e-9
        assert d.min_eigenvalue >= -1e-7
        assert d.clamp_rate < 1e-3


# ---------------------------------------------------------------------------
# 3. diffusion-matrix identity
# ---------------------------------------------------------------------------

class TestCriterion3DiffusionIdentity:
    def test_factorization_on_1000_states(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(1000):
            rates = rng.uniform(0.0, 2.0, (3, 3))
            np.fill_diagonal(rates, 0.0)
            gp = rng.uniform(0.0, 1.0, (3, 3))
            gp = 0.5 * (gp + gp.T)
            np.fill_diagonal(gp, 0.0)
            params = make_params(coupling=rng.uniform(-1, 1),
                                 tunneling=rng.uniform(-1, 1), rates=rates,
                                 gamma_p=gp, kappa=rng.uniform(0, 1),
                                 n_thermal=rng.uniform(0, 2))
            st = random_physical_state(rng, field_scale=2.0)
            rep = verify_factorization(st, params, tol=1e-10)
            worst = max(worst, rep["max_residual"] / rep["scale"])
            assert rep["passed"], rep["offending_entries"][:3]
        report("3a noise-matrix factorization B B^T = D", worst < 1e-10,
               f"worst relative residual {worst:.2e} over 1000 random "
               f"physical states (tol 1e-10)")
        assert worst < 1e-10

    def test_block_templates_symbolic_numeric(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(200):
            a, b, c = (complex(rng.standard_normal(), rng.standard_normal())
                       for _ in range(3))
            for family, args in (("ladder", (a, b, c)), ("population", (a,)),
                                 ("cross", (a, b, c)), ("conjugate", (a,))):
                bm, d = factor_block(family, *args)
                worst = max(worst, np.abs(bm @ bm.T - d).max())
            bm, d = factor_block("population", a, variant="coherence")
            worst = max(worst, np.abs(bm @ bm.T - d).max())
        report("3b block factorization templates", worst < 1e-12,
               f"worst |B B^T - D| {worst:.2e} over random symbols")
        assert worst < 1e-12


# ---------------------------------------------------------------------------
# 4. noise statistics
# ---------------------------------------------------------------------------

def _lasing_point():
    rates = np.array([[0.0, 2.0, 0.05],
                      [0.1, 0.0, 0.25],
                      [0.05, 0.03, 0.0]]) * 1e12
    gp = np.full((3, 3), 1.3e12)
    np.fill_diagonal(gp, 0.0)
    mu, om = 3e-28, 1.5e12
    system = QuantumSystem(
        energies=np.array([15e-3, 0.0, 14.5e-3]) * 1.602176634e-19,
        dipole=np.array([[0, 0, 0], [0, 0, mu], [0, mu, 0]], float),
        tunneling=np.array([[0, 0, om], [0, 0, 0], [om, 0, 0]], float),
        scatter=rates, dephasing_p=gp, carrier_density=5e21)
    rho = np.array([[0.45, 0.02 - 0.01j, 0.04 + 0.025j],
                    [0.02 + 0.01j, 0.12, 0.05 - 0.035j],
                    [0.04 - 0.025j, 0.05 + 0.035j, 0.43]], complex)
    return system, rho, 5.0e5, om


class TestCriterion4NoiseStatistics:
    def test_full_scheme_second_moments_1e6(self):
        system, rho, e_field, om = _lasing_point()
        coeffs = ThreeLevelCoeffs.from_system(system)
        psi = -coeffs.dipole_ul * e_field / hbar
        params = make_params(coupling=psi, tunneling=om, rates=coeffs.rates,
                             gamma_p=system.dephasing_p, classical_field=True)
        target = classical_covariance_closed(CNumberState(rho, 1.0), params)
        m = 1_000_000
        rng = np.random.default_rng(12)
        slots = {2: (1, 2), 3: (2, 0), 4: (1, 0), 5: (2, 2), 6: (1, 1),
                 7: (0, 0), 8: (0, 1), 9: (0, 2), 10: (2, 1)}
        # accumulate in chunks to bound memory
        sums = np.zeros((11, 11), complex)
        sq_re = np.zeros((11, 11))
        sq_im = np.zeros((11, 11))
        clamps = 0
        chunk = 100_000
        for _ in range(m // chunk):
            draws = rng.standard_normal((chunk, FULL_SLOTS))
            f, cl = full_fluctuation_vector(
                np.broadcast_to(rho, (chunk, 3, 3)).copy(), coeffs, om,
                np.full(chunk, e_field), 1.0, draws)
            clamps += cl
            vals = {k: f[:, i, j] for k, (i, j) in slots.items()}
            for a in range(2, 11):
                for b in range(a, 11):
                    prod = vals[a] * vals[b]
                    sums[a, b] += prod.sum()
                    sq_re[a, b] += (prod.real**2).sum()
                    sq_im[a, b] += (prod.imag**2).sum()
        worst_z = 0.0
        for a in range(2, 11):
            for b in range(a, 11):
                mean = sums[a, b] / m
                se_re = np.sqrt(max(sq_re[a, b] / m - mean.real**2, 1e-300) / m)
                se_im = np.sqrt(max(sq_im[a, b] / m - mean.imag**2, 1e-300) / m)
                diff = mean - target[a, b]
                worst_z = max(worst_z, abs(diff.real) / se_re,
                              abs(diff.imag) / se_im)
        ok = worst_z <= 3.0 and clamps == 0
        report("4a full-scheme moments vs covariance matrix (1e6 draws)", ok,
               f"worst z-score {worst_z:.2f} over all second moments "
               f"(tol 3 sigma); clamped draws {clamps}")
        assert clamps == 0
        assert worst_z <= 3.0

    def test_reduced_scheme_variances_1e5(self):
        rng = np.random.default_rng(5)
        rho = np.array([[0.3, 0.1 + 0.05j], [0.1 - 0.05j, 0.7]], complex)
        scatter = np.array([[0.0, 0.8e12], [0.2e12, 0.0]])
        gamma = np.array([[0.0, 1.1e12], [1.1e12, 0.0]])
        n_cell = 1e4
        n = 100_000
        kick, _ = reduced_population_noise(1, 0, rho, scatter, n_cell,
                                           rng.standard_normal(n))
        pop_want = (scatter[0, 1] * rho[1, 1].real
                    + scatter[1, 0] * rho[0, 0].real) / n_cell
        pop_err = abs(np.mean(kick**2) / pop_want - 1)
        kick, _ = reduced_coherence_noise(1, 0, rho, scatter, gamma, n_cell,
                                          rng.standard_normal(n),
                                          rng.standard_normal(n))
        rad = ((-scatter[:, 0].sum() * rho[0, 0].real
                + scatter[0, 1] * rho[1, 1].real
                + 2 * gamma[1, 0] * rho[0, 0].real) / (2 * n_cell))
        coh_err = abs(np.mean(np.abs(kick)**2) / (2 * rad) - 1)
        ok = pop_err < 0.05 and coh_err < 0.05
        report("4b reduced-scheme variances vs closed forms (1e5 draws)", ok,
               f"population {pop_err:.3f}, coherence {coh_err:.3f} (tol 0.05)")
        assert ok


# ---------------------------------------------------------------------------
# 5. superfluorescence vs amplified spontaneous emission
# ---------------------------------------------------------------------------

def _smoothed_peak(trace, window=2e-12):
    inten = np.asarray(trace.data, dtype=float) ** 2
    k = max(1, int(window / trace.dt))
    sm = np.convolve(inten, np.ones(k) / k, mode="same")
    return sm.max(axis=0), sm.argmax(axis=0) * trace.dt, sm


_SF_DURATION = 280e-12


@pytest.fixture(scope="module")
def sf_batch():
    scn = superfluorescence_scenario(t2=100e-12, duration=_SF_DURATION)
    sim = Simulation(scn, seed=101, batch_shape=(20,), check_every=500)
    return sim.run()


@pytest.fixture(scope="module")
def ase_run():
    scn = superfluorescence_scenario(t2=14.3e-12, duration=_SF_DURATION)
    return Simulation(scn, seed=101, check_every=500).run()


class TestCriterion5Superfluorescence:

    def test_peak_ratio_and_delay(self, sf_batch, ase_run):
        fac = sf_batch.probes["facet"]          # (steps, 20)
        dt = sf_batch.dt
        inten = np.asarray(fac, dtype=float) ** 2
        k = max(1, int(2e-12 / dt))
        kernel = np.ones(k) / k
        peaks, delays = [], []
        for j in range(inten.shape[1]):
            sm = np.convolve(inten[:, j], kernel, mode="same")
            peaks.append(sm.max())
            delays.append(sm.argmax() * dt)
        peaks, delays = np.array(peaks), np.array(delays)
        ase_peak, ase_t, _ = _smoothed_peak(ase_run.probes["facet"])
        ratio = np.median(peaks) / ase_peak
        jitter = delays.max() - delays.min()
        delayed = np.all(delays > 20e-12)
        ok = ratio >= 10 and jitter > 0 and delayed
        report("5a cooperative emission vs fast-dephasing run", ok,
               f"median peak ratio {ratio:.1f} (tol >= 10); delays "
               f"{delays.min() * 1e12:.1f}..{delays.max() * 1e12:.1f} ps over "
               f"20 seeds, jitter {jitter * 1e12:.2f} ps (nonzero)")
        assert ratio >= 10
        assert jitter > 0
        assert delayed

    def test_bloch_ratio_behavior(self, sf_batch, ase_run):
        sf_ratio = np.asarray(sf_batch.probes["bloch_ratio"], dtype=float)
        sf_min = np.nanmin(sf_ratio)
        ase_ratio = np.asarray(ase_run.probes["bloch_ratio"].data, dtype=float)
        ase_min = np.nanmin(ase_ratio)
        ok = sf_min < 0.5 and ase_min > 0.9
        report("5b Bloch-vector decoherence metric", ok,
               f"cooperative run min r3/|r| {sf_min:.3f} (< 0.5 during the "
               f"pulse); fast-dephasing run min {ase_min:.3f} (> 0.9 "
               f"throughout)")
        assert sf_min < 0.5
        assert ase_min > 0.9

    def test_dark_without_fluctuations(self):
        scn = superfluorescence_scenario(duration=20e-12)
        d = scn.to_dict()
        d["noise"]["scheme"] = "off"
        d["initial"] = {"kind": "populations", "values": [0.0, 1.0]}
        from mdlang.scenarios import Scenario
        res = Simulation(Scenario.from_dict(d)).run(n_steps=20000)
        peak = np.abs(res.probes["facet"].data).max()
        report("5c inverted state is dark without fluctuations", peak == 0.0,
               f"max facet field {peak:.1e} V/m")
        assert peak == 0.0


# ---------------------------------------------------------------------------
# 6. RIN pipeline oracle
# ---------------------------------------------------------------------------

class TestCriterion6Rin:
    def test_tone_oracle_and_rescaling(self):
        m_depth, t_total, n = 1e-4, 10e-6, 2**17
        dt = t_total / n
        f0 = 4096 / t_total
        t = np.arange(n) * dt
        power = 3.0 * (1.0 + m_depth * np.cos(2 * np.pi * f0 * t))
        tr = TraceRecord(power, dt=dt, quantity="power")
        rin = rin_spectrum(tr)
        k = np.argmin(np.abs(rin.frequency - f0))
        want = 10 * np.log10(m_depth**2 * t_total / 4)
        err = abs(rin.value[k] - want)
        scaled = rin_spectrum(TraceRecord(7.25 * power, dt=dt))
        # invariance is exact in the linear density (dB of the empty bins
        # sits at the arithmetic floor, where logs amplify rounding)
        lin_a = 10 ** (rin.value / 10)
        lin_b = 10 ** (scaled.value / 10)
        scale_diff = np.abs(lin_a - lin_b).max() / lin_a.max()
        ok = err < 1.0 and scale_diff < 1e-9
        report("6 RIN oracle", ok,
               f"RIN(f0) = {rin.value[k]:.2f} dB/Hz vs m^2 T/4 = {want:.2f} "
               f"(tol 1 dB); rescaling invariance relative diff "
               f"{scale_diff:.1e}")
        assert err < 1.0
        assert scale_diff < 1e-9


# ---------------------------------------------------------------------------
# 7. desk-scale comb run (full figures via the documented long-run script)
# ---------------------------------------------------------------------------

class TestCriterion7CombRun:
    def test_fifty_round_trip_run(self):
        scn = qcl_hfc_scenario()
        round_trip = scn.notes["round_trip_s"]
        fsr = scn.notes["free_spectral_range_Hz"]
        sim = Simulation(scn, check_every=2000)
        n_steps = int(round(50 * round_trip / sim.dt))
        res = sim.run(n_steps=n_steps)
        d = res.diagnostics
        invariants_ok = d.max_trace_error < 1e-9 and d.min_eigenvalue >= -1e-7
        fac = res.probes["facet"]
        spec = intensity_spectrum(fac)
        sel = (spec.frequency > 2.5e12) & (spec.frequency < 4.5e12)
        f_peak = spec.frequency[sel][np.argmax(spec.value[sel])]
        spacing, peaks = mode_spacing(spec, 3.0e12, 4.0e12, prominence_db=30)
        fsr_err = abs(spacing - fsr) / fsr
        ok = (invariants_ok and len(peaks) >= 5
              and abs(f_peak - 3.5e12) < 0.3e12 and fsr_err < 0.02)
        report("7 fifty-round-trip comb run", ok,
               f"invariants: |trace-1| {d.max_trace_error:.1e}, min eig "
               f"{d.min_eigenvalue:.1e}, clamp rate {d.clamp_rate:.2e} "
               f"(reported); spectrum: {len(peaks)} lines, peak at "
               f"{f_peak / 1e12:.2f} THz, spacing {spacing / 1e9:.3f} GHz vs "
               f"c/(2nL) = {fsr / 1e9:.3f} GHz, error {fsr_err:.4f} (tol 0.02)")
        assert invariants_ok
        assert len(peaks) >= 5
        assert abs(f_peak - 3.5e12) < 0.3e12
        assert fsr_err < 0.02

    def test_long_run_script_available(self):
        script = REPO / "scripts" / "run_hfc_full.py"
        ok = script.exists()
        if ok:
            res = subprocess.run([sys.executable, str(script), "--describe"],
                                 capture_output=True, text=True)
            ok = res.returncode == 0 and "2" in res.stdout
        report("7b documented long-run reproduction script", ok,
               f"{script} present and self-describing")
        assert ok
