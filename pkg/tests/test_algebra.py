"""The operator-algebra engine: reductions, reordering, drift equations
and derived covariances."""

import numpy as np
import pytest

from mdlang.algebra import (A, ADAG, CovarianceEngine, ModeParams,
                            MomentEvaluator, SIGMA_ID, drift_polynomials,
                            poly_mul, reduce_poly, reorder_poly)


def params(classical=False, rng=None):
    rng = rng or np.random.default_rng(0)
    rates = rng.uniform(0.1, 1.0, (3, 3))
    np.fill_diagonal(rates, 0.0)
    gp = rng.uniform(0.0, 0.5, (3, 3))
    gp = 0.5 * (gp + gp.T)
    np.fill_diagonal(gp, 0.0)
    inv_tau = rates.sum(axis=0)
    gamma = 0.5 * (inv_tau[:, None] + inv_tau[None, :]) + gp
    np.fill_diagonal(gamma, 0.0)
    return ModeParams(omega=np.array([1.1, 0.0, 1.0]), tunneling=0.7,
                      coupling=0.8, rates=rates, gamma=gamma,
                      omega_mode=1.0, kappa=0.4, n_thermal=0.3,
                      classical_field=classical)


S = SIGMA_ID  # (i, j) -> component id; levels: 0 injector, 1 lower, 2 upper


class TestReduction:
    def test_level_products_collapse(self):
        # s23 s32 = s22 ; s32 s23 = s33 ; s23 s23 = 0
        assert reduce_poly({(S[(1, 2)], S[(2, 1)]): 1.0}) == {(0, 0, S[(1, 1)]): 1.0}
        assert reduce_poly({(S[(2, 1)], S[(1, 2)]): 1.0}) == {(0, 0, S[(2, 2)]): 1.0}
        assert reduce_poly({(S[(1, 2)], S[(1, 2)]): 1.0}) == {}

    def test_field_normal_ordering(self):
        # b b+ = b+ b + 1
        out = reduce_poly({(A, ADAG): 1.0})
        assert out == {(1, 1, None): 1.0, (0, 0, None): 1.0}

    def test_field_commutes_with_levels(self):
        out = reduce_poly({(A, S[(1, 2)], ADAG): 1.0})
        assert out == {(1, 1, S[(1, 2)]): 1.0, (0, 0, S[(1, 2)]): 1.0}


class TestReordering:
    def test_inorder_product_unchanged(self):
        term = (ADAG, S[(2, 2)], S[(1, 2)])
        assert reorder_poly({term: 2.0}) == {term: 2.0}

    def test_population_coherence_swap(self):
        # s23 s33 = s33 s23 + s23  (commutator correction)
        out = reorder_poly({(S[(1, 2)], S[(2, 2)]): 1.0})
        assert out == {(S[(2, 2)], S[(1, 2)]): 1.0, (S[(1, 2)],): 1.0}

    def test_field_swap_scalar(self):
        out = reorder_poly({(A, ADAG): 1.0})
        assert out == {(ADAG, A): 1.0, (): 1.0}

    def test_reorder_preserves_reduction(self):
        # reordering is exact: reducing before or after agrees
        rng = np.random.default_rng(4)
        comps = [ADAG, A] + list(S.values())
        ev = MomentEvaluator(np.array([[0.5, 0.1 + 0.2j, 0.05],
                                       [0.1 - 0.2j, 0.3, -0.07j],
                                       [0.05, 0.07j, 0.2]]), 0.4 + 0.3j)
        for _ in range(40):
            term = tuple(rng.choice(comps, size=3))
            direct = ev.canonical(reduce_poly({term: 1.0}))
            via = sum(c * ev.canonical(reduce_poly({t: 1.0}))
                      for t, c in reorder_poly({term: 1.0}).items())
            assert direct == pytest.approx(via, abs=1e-14)


class TestDrift:
    def test_matches_equations_of_motion(self):
        """Engine-derived drift terms equal the printed three-level
        equations of motion, term by term."""
        p = params()
        drift = drift_polynomials(p)
        g, om = p.coupling, p.tunneling
        d32 = p.omega[2] - p.omega[1]
        # optical coherence s23: -i d32 s23 - g23 s23 + i om s21 + i g (s33 - s22) b
        s23 = drift[S[(1, 2)]]
        assert s23[(S[(1, 2)],)] == pytest.approx(-1j * d32 - p.gamma[1, 2])
        assert s23[(S[(1, 0)],)] == pytest.approx(1j * om)
        assert s23[(S[(2, 2)], A)] == pytest.approx(1j * g)
        assert s23[(S[(1, 1)], A)] == pytest.approx(-1j * g)
        # tunneling coherence s31: + i om (s33 - s11) + i g s21 b+
        s31 = drift[S[(2, 0)]]
        assert s31[(S[(2, 2)],)] == pytest.approx(1j * om)
        assert s31[(S[(0, 0)],)] == pytest.approx(-1j * om)
        assert s31[(ADAG, S[(1, 0)])] == pytest.approx(1j * g)
        # upper population: rates plus ig(b+ s23 - s32 b) - i om (s13 - s31)
        up = drift[S[(2, 2)]]
        assert up[(S[(2, 2)],)] == pytest.approx(-p.rates[:, 2].sum())
        assert up[(S[(1, 1)],)] == pytest.approx(p.rates[2, 1])
        assert up[(S[(0, 0)],)] == pytest.approx(p.rates[2, 0])
        assert up[(ADAG, S[(1, 2)])] == pytest.approx(1j * g)
        assert up[(S[(2, 1)], A)] == pytest.approx(-1j * g)
        assert up[(S[(0, 2)],)] == pytest.approx(-1j * om)
        assert up[(S[(2, 0)],)] == pytest.approx(1j * om)

    def test_classical_field_mode(self):
        """With a classical drive the RWA distinction collapses: the same
        coupling multiplies both rotating components."""
        p = params(classical=True)
        drift = drift_polynomials(p)
        s23 = drift[S[(1, 2)]]
        assert s23[(S[(2, 2)],)] == pytest.approx(1j * p.coupling)
        assert A not in drift and ADAG not in drift

    def test_trace_conservation_of_drift(self):
        p = params()
        drift = drift_polynomials(p)
        total = {}
        for k in range(3):
            for term, c in drift[S[(k, k)]].items():
                total[term] = total.get(term, 0.0) + c
        assert all(abs(v) < 1e-14 for v in total.values())


class TestCovariances:
    def test_worked_pair(self):
        """(s32, s23): the engine reproduces the closed dephasing-rate
        combination (2 g23 - 1/tau_up) p_up + r32 p_lo + r31 p_in."""
        p = params()
        eng = CovarianceEngine(p)
        rng = np.random.default_rng(1)
        gmat = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        rho = gmat @ gmat.conj().T
        rho /= np.trace(rho).real
        ev = MomentEvaluator(rho, 0.2 + 0.1j)
        got = eng.operator_covariance(S[(2, 1)], S[(1, 2)], ev)
        want = ((2 * p.gamma[1, 2] - p.rates[:, 2].sum()) * rho[2, 2]
                + p.rates[2, 1] * rho[1, 1] + p.rates[2, 0] * rho[0, 0])
        assert got == pytest.approx(want)

    def test_classical_anomalous_pair(self):
        """(s23, s23) vanishes for operators but equals 2 i g a s23
        classically -- the reordering correction in isolation."""
        p = params()
        eng = CovarianceEngine(p)
        rho = np.array([[0.4, 0.1, 0.1j], [0.1, 0.35, 0.2],
                        [-0.1j, 0.2, 0.25]], complex)
        ev = MomentEvaluator(rho, 0.7 - 0.2j)
        assert eng.operator_covariance(S[(1, 2)], S[(1, 2)], ev) == \
            pytest.approx(0.0)
        got = eng.classical_covariance(S[(1, 2)], S[(1, 2)], ev)
        want = 2j * p.coupling * (0.7 - 0.2j) * rho[2, 1]
        assert got == pytest.approx(want)

    def test_field_pair_reservoir_input(self):
        p = params()
        eng = CovarianceEngine(p)
        ev = MomentEvaluator(np.eye(3, dtype=complex) / 3, 0.0)
        assert eng.classical_covariance(ADAG, A, ev) == \
            pytest.approx(p.kappa * p.n_thermal)
        assert eng.operator_covariance(A, ADAG, ev) == \
            pytest.approx(p.kappa * (p.n_thermal + 1))

    def test_matrix_symmetry(self):
        p = params()
        eng = CovarianceEngine(p)
        rng = np.random.default_rng(9)
        gmat = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        rho = gmat @ gmat.conj().T
        rho /= np.trace(rho).real
        d = eng.classical_covariance_matrix(MomentEvaluator(rho, 0.3 + 0.4j))
        assert np.abs(d - d.T).max() < 1e-14

    def test_population_block_row_sums(self):
        """Trace conservation of the noise: population rows of the
        covariance sum to zero over population indices."""
        p = params()
        eng = CovarianceEngine(p)
        rng = np.random.default_rng(12)
        gmat = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        rho = gmat @ gmat.conj().T
        rho /= np.trace(rho).real
        d = eng.classical_covariance_matrix(MomentEvaluator(rho, 0.5))
        pop = [5, 6, 7]  # display rows s33, s22, s11
        for r in range(11):
            assert abs(d[r, pop].sum()) < 1e-13
