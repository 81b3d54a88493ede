"""Tiny operator algebra for the three-level gain medium coupled to one
field mode, used to derive noise covariances from first principles.

The engine knows eleven system components, written in the fixed "chosen
order" used for converting operator products into classical-variable
products:

    index  0    1     2     3     4    5    6    7    8    9    10
    op     b+   s32   s13   s12   s33  s22  s11  s21  s31  s23  b

where ``s_ij = |i><j|`` with level indices 0 = injector, 1 = lower laser
level, 2 = upper laser level, and ``b``/``b+`` the field-mode ladder
operators.  Operator polynomials are dictionaries mapping tuples of
component indices (written left to right) to complex coefficients.

Two independent reductions drive everything:

* :func:`reduce_poly` applies ``s_ij s_kl = delta_jk s_il`` and field
  normal ordering exactly, collapsing a product to canonical monomials
  ``(b+)^m b^n s_ij`` -- the route used for reservoir (fluctuation)
  covariances of the operator theory.
* :func:`reorder_poly` sorts each product into chosen order, collecting
  the exact commutator corrections -- the route that turns operator
  covariances into the classical-variable covariances used by the
  stochastic solver.

From the drift part of the equations of motion alone, both the operator
noise covariances and the classical ones follow; no transcription of the
final formulas enters here, so this module is an independent oracle for
the closed forms implemented in :mod:`mdlang.diffusion`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# component ids in chosen order
ADAG = 0
A = 10
N_COMPONENTS = 11

# sigma components: id -> (i, j) for s_ij = |i><j|
SIGMA_OF = {
    1: (2, 1),   # s32  (dagger of the optical coherence)
    2: (0, 2),   # s13  (dagger of the tunneling coherence)
    3: (0, 1),   # s12  (dagger of the injector-lower coherence)
    4: (2, 2),   # upper population
    5: (1, 1),   # lower population
    6: (0, 0),   # injector population
    7: (1, 0),   # s21
    8: (2, 0),   # s31
    9: (1, 2),   # s23  (optical coherence)
}
SIGMA_ID = {v: k for k, v in SIGMA_OF.items()}
SIGMAS = tuple(SIGMA_OF)

# display order of the 11-component classical vector used for covariance
# matrices: (b+, b, s32, s13, s12, s33, s22, s11, s21, s31, s23)
DISPLAY = (ADAG, A, 1, 2, 3, 4, 5, 6, 7, 8, 9)

COMPONENT_NAMES = {
    ADAG: "b+", A: "b", 1: "s32", 2: "s13", 3: "s12",
    4: "s33", 5: "s22", 6: "s11", 7: "s21", 8: "s31", 9: "s23",
}


def _add(poly: dict, term: tuple, coeff: complex) -> None:
    if coeff == 0:
        return
    new = poly.get(term, 0.0) + coeff
    if new == 0:
        poly.pop(term, None)
    else:
        poly[term] = new


def poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for t1, c1 in p.items():
        for t2, c2 in q.items():
            _add(out, t1 + t2, c1 * c2)
    return out


def poly_sum(*polys: dict) -> dict:
    out: dict = {}
    for p in polys:
        for t, c in p.items():
            _add(out, t, c)
    return out


def poly_scale(p: dict, s: complex) -> dict:
    return {t: s * c for t, c in p.items() if s * c != 0}


def reduce_poly(poly: dict) -> dict:
    """Collapse each product to canonical monomials ``(m, n, sigma)``.

    Keys of the result are ``(m, n, sig)`` with ``m`` powers of b+, ``n``
    powers of b and ``sig`` a sigma id or None.
    """
    out: dict = {}
    stack = list(poly.items())
    while stack:
        term, coeff = stack.pop()
        # split field ops (keeping order) from sigmas (keeping order)
        fields = [c for c in term if c in (A, ADAG)]
        sigmas = [c for c in term if c not in (A, ADAG)]
        # reduce the sigma chain to a single sigma or zero
        sig = None
        dead = False
        for s in sigmas:
            i, j = SIGMA_OF[s]
            if sig is None:
                sig = (i, j)
            elif sig[1] == i:
                sig = (sig[0], j)
            else:
                dead = True
                break
        if dead:
            continue
        # normal-order the field chain; [b, b+] = 1 corrections re-enter
        swapped = False
        for k in range(len(fields) - 1):
            if fields[k] == A and fields[k + 1] == ADAG:
                rest = fields[:k] + [ADAG, A] + fields[k + 2:]
                stack.append((tuple(rest) + tuple(sigmas), coeff))
                stack.append((tuple(fields[:k] + fields[k + 2:]) + tuple(sigmas), coeff))
                swapped = True
                break
        if swapped:
            continue
        m = fields.count(ADAG)
        n = fields.count(A)
        key = (m, n, SIGMA_ID[sig] if sig is not None else None)
        new = out.get(key, 0.0) + coeff
        if new == 0:
            out.pop(key, None)
        else:
            out[key] = new
    return out


def _commutator_table() -> dict:
    """[x, y] for single components, as lists of (coeff, component-tuple)."""
    table = {}
    for x in range(N_COMPONENTS):
        for y in range(N_COMPONENTS):
            if x == y:
                table[(x, y)] = []
                continue
            x_field = x in (A, ADAG)
            y_field = y in (A, ADAG)
            if x_field and y_field:
                # [b, b+] = 1, [b+, b] = -1
                table[(x, y)] = [(1.0 if x == A else -1.0, ())]
            elif x_field or y_field:
                table[(x, y)] = []
            else:
                (i, j), (k, l) = SIGMA_OF[x], SIGMA_OF[y]
                terms = []
                if j == k:
                    terms.append((1.0, (SIGMA_ID[(i, l)],)))
                if l == i:
                    terms.append((-1.0, (SIGMA_ID[(k, j)],)))
                table[(x, y)] = terms
    return table


_COMM = _commutator_table()


def reorder_poly(poly: dict) -> dict:
    """Bring every product into chosen order, keeping exact commutator
    corrections.  Result keys are sorted component tuples ("moments")."""
    out: dict = {}
    stack = list(poly.items())
    while stack:
        term, coeff = stack.pop()
        for k in range(len(term) - 1):
            if term[k] > term[k + 1]:
                swapped = term[:k] + (term[k + 1], term[k]) + term[k + 2:]
                stack.append((swapped, coeff))
                for c2, comps in _COMM[(term[k], term[k + 1])]:
                    stack.append((term[:k] + comps + term[k + 2:], coeff * c2))
                break
        else:
            new = out.get(term, 0.0) + coeff
            if new == 0:
                out.pop(term, None)
            else:
                out[term] = new
    return out


@dataclass(frozen=True)
class ModeParams:
    """Parameter bundle: three-level rates plus one field mode.

    ``rates[i, j]`` is the scattering rate j -> i; ``gamma`` the total
    dephasing matrix; ``omega`` the level angular frequencies eps/hbar;
    ``coupling`` the dipole coupling g of the mode; ``tunneling`` the
    injector anticrossing Omega; ``kappa``/``n_thermal`` the cavity decay
    and thermal photon number (field-reservoir inputs).
    """

    omega: np.ndarray        # (3,) rad/s
    tunneling: float         # rad/s
    coupling: float          # rad/s (g); for classical mode: -mu*E/hbar
    rates: np.ndarray        # (3, 3) 1/s
    gamma: np.ndarray        # (3, 3) 1/s
    omega_mode: float = 0.0  # rad/s
    kappa: float = 0.0       # 1/s
    n_thermal: float = 0.0
    classical_field: bool = False


def _coherent_hamiltonian(p: ModeParams) -> dict:
    """H_s / hbar as an operator polynomial (rad/s)."""
    h: dict = {}
    for k in range(3):
        _add(h, (SIGMA_ID[(k, k)],), p.omega[k])
    _add(h, (SIGMA_ID[(0, 2)],), -p.tunneling)
    _add(h, (SIGMA_ID[(2, 0)],), -p.tunneling)
    if p.classical_field:
        # interaction -mu E (s21 + s12): coupling = -mu E / hbar
        _add(h, (SIGMA_ID[(2, 1)],), p.coupling)
        _add(h, (SIGMA_ID[(1, 2)],), p.coupling)
    else:
        _add(h, (ADAG, A), p.omega_mode)
        _add(h, (SIGMA_ID[(2, 1)], A), p.coupling)
        _add(h, (SIGMA_ID[(1, 2)], ADAG), p.coupling)
    return h


def drift_polynomials(p: ModeParams) -> dict:
    """Drift (deterministic) part of each component's equation of motion.

    Coherent terms come from the exact commutator with the system
    Hamiltonian; incoherent terms are the rate in/out and dephasing
    contributions.  Returns {component id: canonical-term polynomial}.
    """
    h = _coherent_hamiltonian(p)
    drift = {}
    for comp in SIGMAS:
        x = {(comp,): 1.0}
        comm = poly_sum(poly_mul(x, h), poly_scale(poly_mul(h, x), -1.0))
        terms = poly_scale(_canonical_to_terms(reduce_poly(comm)), -1.0j)
        i, j = SIGMA_OF[comp]
        if i == j:
            inv_tau = p.rates[:, i].sum()
            _add(terms, (comp,), -inv_tau)
            for k in range(3):
                if k != i:
                    _add(terms, (SIGMA_ID[(k, k)],), p.rates[i, k])
        else:
            _add(terms, (comp,), -p.gamma[i, j])
        drift[comp] = terms
    if not p.classical_field:
        drift[A] = {(A,): -1.0j * p.omega_mode - 0.5 * p.kappa,
                    (SIGMA_ID[(1, 2)],): -1.0j * p.coupling}
        drift[ADAG] = {(ADAG,): 1.0j * p.omega_mode - 0.5 * p.kappa,
                       (SIGMA_ID[(2, 1)],): 1.0j * p.coupling}
    return drift


def _canonical_to_terms(canon: dict) -> dict:
    """Canonical (m, n, sig) keys back to component-tuple polynomials."""
    out: dict = {}
    for (m, n, sig), coeff in canon.items():
        term = (ADAG,) * m + ((sig,) if sig is not None else ()) + (A,) * n
        _add(out, term, coeff)
    return out


class MomentEvaluator:
    """Evaluates operator polynomials at a factorized classical state."""

    def __init__(self, rho: np.ndarray, field_amp: complex = 0.0):
        self.rho = np.asarray(rho, dtype=complex)
        self.alpha = complex(field_amp)

    def component(self, comp: int) -> complex:
        if comp == A:
            return self.alpha
        if comp == ADAG:
            return np.conj(self.alpha)
        i, j = SIGMA_OF[comp]
        return self.rho[j, i]          # <s_ij> = rho_ji

    def term(self, term: tuple) -> complex:
        val = 1.0 + 0.0j
        for comp in term:
            val *= self.component(comp)
        return val

    def poly(self, poly: dict) -> complex:
        return sum((c * self.term(t) for t, c in poly.items()), 0.0 + 0.0j)

    def canonical(self, canon: dict) -> complex:
        out = 0.0 + 0.0j
        for (m, n, sig), coeff in canon.items():
            val = np.conj(self.alpha) ** m * self.alpha**n
            if sig is not None:
                i, j = SIGMA_OF[sig]
                val *= self.rho[j, i]
            out += coeff * val
        return out


class CovarianceEngine:
    """Derives noise covariances <F_mu F_nu>/delta from the drift alone.

    ``operator_covariance`` gives the reservoir-theory result (products
    fully reduced); ``classical_covariance`` adds the exact reordering
    corrections that appear when operator products are replaced by
    commuting classical variables.
    """

    def __init__(self, params: ModeParams):
        self.params = params
        self.drift = drift_polynomials(params)

    def _product_polys(self, mu: int, nu: int):
        left = poly_mul(self.drift[mu], {(nu,): 1.0})
        right = poly_mul({(mu,): 1.0}, self.drift[nu])
        return poly_sum(left, right)

    def operator_covariance(self, mu: int, nu: int, state: MomentEvaluator) -> complex:
        """<F_mu F_nu>/delta for the operator theory, via the Einstein
        relation with all products reduced by the level algebra."""
        p = self.params
        if mu in (A, ADAG) or nu in (A, ADAG):
            if (mu, nu) == (ADAG, A):
                return p.kappa * p.n_thermal
            if (mu, nu) == (A, ADAG):
                return p.kappa * (p.n_thermal + 1.0)
            return 0.0 + 0.0j
        prod = reduce_poly({(mu, nu): 1.0})
        lhs = 0.0 + 0.0j
        for (m, n, sig), coeff in prod.items():
            if sig is None or m or n:
                raise ValueError("pair does not reduce to a bare level operator")
            lhs += coeff * state.poly(self.drift[sig])
        rhs = state.canonical(reduce_poly(self._product_polys(mu, nu)))
        return lhs - rhs

    def classical_covariance(self, mu: int, nu: int, state: MomentEvaluator) -> complex:
        """Covariance of the classical (commuting-variable) noise terms:
        operator covariance plus reordering corrections."""
        if (mu, nu) in ((ADAG, A), (A, ADAG)):
            return self.operator_covariance(mu, nu, state)
        q = self._product_polys(mu, nu)
        corrections = state.poly(reorder_poly(q)) - state.poly(q)
        return self.operator_covariance(mu, nu, state) + corrections

    def classical_covariance_matrix(self, state: MomentEvaluator) -> np.ndarray:
        """Full 11x11 classical covariance in display order."""
        n = len(DISPLAY)
        d = np.zeros((n, n), dtype=complex)
        chosen_of_display = list(DISPLAY)
        for r in range(n):
            for c in range(r, n):
                mu, nu = chosen_of_display[r], chosen_of_display[c]
                if mu > nu:
                    mu, nu = nu, mu
                d[r, c] = d[c, r] = self.classical_covariance(mu, nu, state)
        return d

    def drift_vector(self, vec: np.ndarray) -> np.ndarray:
        """Factorized drift of the 11-component vector in display order."""
        state = MomentEvaluator(_display_to_rho(vec), vec[1])
        return np.array([state.poly(self.drift.get(c, {})) for c in DISPLAY])

    def einstein_residual(self, mu: int, nu: int, state: MomentEvaluator,
                          dt: float) -> float:
        """|finite-difference Einstein relation - closed covariance|.

        Advances the factorized first-moment state by one RK4 drift step,
        finite-differences the reduced pair moment, subtracts the drift
        products, and compares with :meth:`operator_covariance`.
        """
        prod = reduce_poly({(mu, nu): 1.0})
        vec0 = _state_to_display(state)
        vec1 = _rk4_step(self.drift_vector, vec0, dt)
        m0 = _eval_reduced(prod, vec0)
        m1 = _eval_reduced(prod, vec1)
        fd = (m1 - m0) / dt
        rhs = state.canonical(reduce_poly(self._product_polys(mu, nu)))
        return abs(fd - rhs - self.operator_covariance(mu, nu, state))


def _display_to_rho(vec: np.ndarray) -> np.ndarray:
    """11-component display vector -> 3x3 state matrix (rho_ji = <s_ij>)."""
    rho = np.zeros((3, 3), dtype=complex)
    for pos, comp in enumerate(DISPLAY):
        if comp in (A, ADAG):
            continue
        i, j = SIGMA_OF[comp]
        rho[j, i] = vec[pos]
    return rho


def _state_to_display(state: MomentEvaluator) -> np.ndarray:
    return np.array([state.component(c) for c in DISPLAY])


def _eval_reduced(canon: dict, vec: np.ndarray) -> complex:
    state = MomentEvaluator(_display_to_rho(vec), vec[1])
    return state.canonical(canon)


def _rk4_step(f, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
