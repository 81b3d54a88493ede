"""Covariance oracles: closed forms vs the derivation engine, the block
templates, the exact factorization and the Einstein residual."""

import numpy as np
import pytest

from mdlang.algebra import COMPONENT_NAMES, CovarianceEngine
from mdlang.diffusion import (CNumberState, DISPLAY_NAMES, assemble_noise_matrix,
                              classical_covariance_closed,
                              classical_covariance_derived, einstein_check,
                              factor_block, make_params, quantum_correlation,
                              random_physical_state, verify_factorization)


def random_params(rng, **kw):
    rates = rng.uniform(0.0, 2.0, (3, 3))
    np.fill_diagonal(rates, 0.0)
    gp = rng.uniform(0.0, 1.0, (3, 3))
    gp = 0.5 * (gp + gp.T)
    np.fill_diagonal(gp, 0.0)
    return make_params(coupling=rng.uniform(-1, 1),
                       tunneling=rng.uniform(-1, 1), rates=rates, gamma_p=gp,
                       kappa=rng.uniform(0, 1), n_thermal=rng.uniform(0, 2),
                       **kw)


class TestFactorBlocks:
    @pytest.mark.parametrize("family,nargs", [
        ("ladder", 3), ("population", 1), ("cross", 3), ("conjugate", 1)])
    def test_templates_factorize(self, family, nargs):
        rng = np.random.default_rng(1)
        for _ in range(20):
            args = [complex(rng.standard_normal(), rng.standard_normal())
                    for _ in range(nargs)]
            b, d = factor_block(family, *args)
            assert np.abs(b @ b.T - d).max() < 1e-12

    def test_conjugate_family_printed_example(self):
        _, d = factor_block("conjugate", 1.0)
        assert np.allclose(d, [[0, 2], [2, 0]])

    def test_population_family_printed_example(self):
        _, d = factor_block("population", 1.0)
        assert np.allclose(d, [[1, -1], [-1, 1]])

    def test_population_coherence_variant(self):
        a = 0.6 + 0.8j
        b, d = factor_block("population", a, variant="coherence")
        assert d[0, 0] == pytest.approx(a**2)
        assert d[0, 1] == pytest.approx(abs(a) ** 2)
        assert np.abs(b @ b.T - d).max() < 1e-14

    def test_ladder_printed_entries(self):
        a, b, c = 1.0, 1.0, 0.0
        _, d = factor_block("ladder", a, b, c)
        want = np.array([[0, -1, 1, 2],
                         [-1, 1, -1, -1],
                         [1, -1, 1, 1],
                         [2, -1, 1, 0]], dtype=complex)
        assert np.abs(d - want).max() < 1e-14


class TestClosedMatrix:
    def test_against_derivation_engine(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            params = random_params(rng)
            engine = CovarianceEngine(params)
            st = random_physical_state(rng, field_scale=2.0)
            closed = classical_covariance_closed(st, params)
            derived = engine.classical_covariance_matrix(st.evaluator())
            scale = np.abs(closed).max()
            assert np.abs(closed - derived).max() < 1e-12 * max(scale, 1.0)

    def test_derived_route_wrapper(self):
        rng = np.random.default_rng(8)
        params = random_params(rng)
        st = random_physical_state(rng)
        a = classical_covariance_closed(st, params)
        b = classical_covariance_derived(st, params)
        assert np.abs(a - b).max() < 1e-12 * max(np.abs(a).max(), 1.0)

    def test_anomalous_entry_value(self):
        """The purely classical entry (s23, s23) = 2 i (g a) s23."""
        rng = np.random.default_rng(9)
        params = random_params(rng)
        st = random_physical_state(rng)
        d = classical_covariance_closed(st, params)
        fa = params.coupling * st.field_amp
        assert d[10, 10] == pytest.approx(2j * fa * st.rho[2, 1])

    def test_population_self_entry_value(self):
        rng = np.random.default_rng(10)
        params = random_params(rng)
        st = random_physical_state(rng)
        d = classical_covariance_closed(st, params)
        r = params.rates
        fa = params.coupling * st.field_amp
        fac = np.conj(fa)
        z23, z31 = st.rho[2, 1], st.rho[0, 2]
        want = ((r[1, 2] + r[0, 2]) * st.rho[2, 2] + r[2, 1] * st.rho[1, 1]
                + r[2, 0] * st.rho[0, 0]
                + 1j * (fac * z23 - fa * np.conj(z23))
                + 1j * params.tunneling * (np.conj(z31) - z31))
        assert d[5, 5] == pytest.approx(want)

    def test_zero_state_zero_matrix(self):
        params = random_params(np.random.default_rng(11))
        st = CNumberState(rho=np.zeros((3, 3)), field_amp=0.0)
        d = classical_covariance_closed(st, params)
        d[0, 1] = d[1, 0] = 0.0  # reservoir input is state-independent
        assert np.abs(d).max() == 0.0


class TestQuantumCorrelations:
    def test_field_pair_difference_is_kappa(self):
        rng = np.random.default_rng(12)
        params = random_params(rng)
        st = random_physical_state(rng)
        up = quantum_correlation(("b", "b+"), st, params)
        dn = quantum_correlation(("b+", "b"), st, params)
        assert up - dn == pytest.approx(params.kappa)

    def test_optical_pair_at_pure_upper(self):
        rng = np.random.default_rng(13)
        params = random_params(rng)
        st = CNumberState(rho=np.diag([0.0, 0.0, 1.0]).astype(complex))
        got = quantum_correlation(("s32", "s23"), st, params)
        inv_tau_up = params.rates[:, 2].sum()
        assert got == pytest.approx(2 * params.gamma[1, 2] - inv_tau_up)

    def test_all_pairs_match_engine(self):
        rng = np.random.default_rng(14)
        params = random_params(rng)
        engine = CovarianceEngine(params)
        name2id = {v: k for k, v in COMPONENT_NAMES.items()}
        st = random_physical_state(rng)
        for pair in [("s32", "s23"), ("s23", "s32"), ("s13", "s31"),
                     ("s31", "s13"), ("s12", "s21"), ("s21", "s12"),
                     ("s33", "s33"), ("s22", "s22"), ("s11", "s11")]:
            closed = quantum_correlation(pair, st, params)
            derived = engine.operator_covariance(
                name2id[pair[0]], name2id[pair[1]], st.evaluator())
            assert closed == pytest.approx(derived, abs=1e-13)

    def test_unknown_pair_rejected(self):
        with pytest.raises(KeyError):
            quantum_correlation(("s23", "s11"),
                                CNumberState(np.eye(3) / 3),
                                random_params(np.random.default_rng(0)))


class TestAssembly:
    def test_factorization_exact_on_random_states(self):
        rng = np.random.default_rng(21)
        for _ in range(60):
            params = random_params(rng)
            st = random_physical_state(rng, field_scale=2.0)
            rep = verify_factorization(st, params, tol=1e-10)
            assert rep["passed"], rep["offending_entries"][:4]

    def test_zero_field_still_exact(self):
        rng = np.random.default_rng(22)
        params = random_params(rng)
        st = random_physical_state(rng, field_scale=0.0)
        assert verify_factorization(st, params)["passed"]

    def test_bookkeeping_deterministic(self):
        rng = np.random.default_rng(23)
        params = random_params(rng)
        st = random_physical_state(rng)
        b1, names1 = assemble_noise_matrix(st, params)
        b2, names2 = assemble_noise_matrix(st, params)
        assert [n for n, _ in names1] == [n for n, _ in names2]
        assert np.array_equal(b1, b2)

    def test_conjugate_symmetry_of_reconstruction(self):
        rng = np.random.default_rng(24)
        params = random_params(rng)
        st = random_physical_state(rng)
        b, _ = assemble_noise_matrix(st, params)
        d = b @ b.T
        # (s23*, s23) self-entries are mutual conjugates on physical states
        assert d[2, 2] == pytest.approx(np.conj(d[10, 10]))
        assert d[3, 3] == pytest.approx(np.conj(d[9, 9]))


class TestEinstein:
    def test_rate_free_system_residual_vanishes(self):
        params = make_params(coupling=0.5, tunneling=0.4,
                             rates=np.zeros((3, 3)), gamma_p=np.zeros((3, 3)))
        st = random_physical_state(np.random.default_rng(31))
        res = einstein_check(("s32", "s23"), st, params, dt=1e-5)
        assert res < 1e-5

    def test_first_order_dt_refinement(self):
        rng = np.random.default_rng(32)
        params = random_params(rng)
        st = random_physical_state(rng)
        coarse = einstein_check(("s32", "s23"), st, params, dt=1e-3)
        fine = einstein_check(("s32", "s23"), st, params, dt=1e-4)
        assert fine == pytest.approx(coarse / 10.0, rel=0.2)
        assert fine < 1e-3

    def test_population_pair(self):
        rng = np.random.default_rng(33)
        params = random_params(rng)
        st = random_physical_state(rng)
        coarse = einstein_check(("s33", "s33"), st, params, dt=1e-3)
        fine = einstein_check(("s33", "s33"), st, params, dt=1e-4)
        assert fine == pytest.approx(coarse / 10.0, rel=0.2)
