"""Fused per-cell matter-step kernels.

The pure-array implementation in :mod:`mdlang.propagator` is the
reference; these kernels perform the identical splitting step (half
relaxation, Cayley rotation, half relaxation, noise kick, Hermitian
symmetrization, polarization) in one pass over the cells, which removes
the per-operation dispatch overhead that dominates small-matrix updates.
They are compiled when numba is importable; a test pins the two paths
against each other.

The Cayley transform uses the real-symmetric form of the Hamiltonian:
with A = H dt/(2 hbar) real symmetric and M = 1 + A^2,

    U = (1 + iA)^(-1) (1 - iA) = (2 M^(-1) - 1) - 2i M^(-1) A,

so only one real symmetric inverse is needed per cell and step.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised on minimal installs
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn
        return wrap if not (args and callable(args[0])) else args[0]


@njit(cache=True)
def _unitary_factors_3(a, minv, r_out, s_out):
    """U = r + i s for A real symmetric 3x3, via M = 1 + A^2."""
    m00 = 1.0 + a[0, 0] * a[0, 0] + a[0, 1] * a[0, 1] + a[0, 2] * a[0, 2]
    m11 = 1.0 + a[0, 1] * a[0, 1] + a[1, 1] * a[1, 1] + a[1, 2] * a[1, 2]
    m22 = 1.0 + a[0, 2] * a[0, 2] + a[1, 2] * a[1, 2] + a[2, 2] * a[2, 2]
    m01 = a[0, 0] * a[0, 1] + a[0, 1] * a[1, 1] + a[0, 2] * a[1, 2]
    m02 = a[0, 0] * a[0, 2] + a[0, 1] * a[1, 2] + a[0, 2] * a[2, 2]
    m12 = a[0, 1] * a[0, 2] + a[1, 1] * a[1, 2] + a[1, 2] * a[2, 2]
    c00 = m11 * m22 - m12 * m12
    c01 = m02 * m12 - m01 * m22
    c02 = m01 * m12 - m02 * m11
    c11 = m00 * m22 - m02 * m02
    c12 = m01 * m02 - m00 * m12
    c22 = m00 * m11 - m01 * m01
    inv_det = 1.0 / (m00 * c00 + m01 * c01 + m02 * c02)
    minv[0, 0] = c00 * inv_det
    minv[0, 1] = c01 * inv_det
    minv[0, 2] = c02 * inv_det
    minv[1, 0] = c01 * inv_det
    minv[1, 1] = c11 * inv_det
    minv[1, 2] = c12 * inv_det
    minv[2, 0] = c02 * inv_det
    minv[2, 1] = c12 * inv_det
    minv[2, 2] = c22 * inv_det
    for i in range(3):
        for j in range(3):
            r_out[i, j] = 2.0 * minv[i, j] - (1.0 if i == j else 0.0)
            acc = 0.0
            for k in range(3):
                acc += minv[i, k] * a[k, j]
            s_out[i, j] = -2.0 * acc


@njit(cache=True)
def _rotate(rho_c, u, t):
    """rho <- U rho U^dagger for one cell (u, t are scratch)."""
    n = rho_c.shape[0]
    for i in range(n):
        for j in range(n):
            acc = 0.0 + 0.0j
            for k in range(n):
                acc += u[i, k] * rho_c[k, j]
            t[i, j] = acc
    for i in range(n):
        for j in range(n):
            acc = 0.0 + 0.0j
            for k in range(n):
                acc += t[i, k] * np.conj(u[j, k])
            rho_c[i, j] = acc


@njit(cache=True)
def _relax_half(rho_c, pop_half, coh_half, p_scratch):
    """Exact half-step relaxation for one cell."""
    n = rho_c.shape[0]
    for k in range(n):
        acc = 0.0
        for l in range(n):
            acc += pop_half[k, l] * rho_c[l, l].real
        p_scratch[k] = acc
    for i in range(n):
        for j in range(n):
            if i != j:
                rho_c[i, j] *= coh_half[i, j]
    for k in range(n):
        rho_c[k, k] = p_scratch[k]


@njit(cache=True)
def _hermitize_cell(rho_c):
    n = rho_c.shape[0]
    for i in range(n):
        rho_c[i, i] = complex(rho_c[i, i].real, 0.0)
        for j in range(i + 1, n):
            v = 0.5 * (rho_c[i, j] + np.conj(rho_c[j, i]))
            rho_c[i, j] = v
            rho_c[j, i] = np.conj(v)


@njit(cache=True)
def _ladder_kick(rho_c, alpha, cross, sr, sc, ur, uc, pa, pb, d1, d2, scale):
    """Shared draw between a coherence pair and a population pair."""
    if alpha == 0.0:
        return
    koa = cross / alpha
    fst = alpha * (d1 - 1j * d2) * scale
    rho_c[sr, sc] += fst
    rho_c[ur, uc] += np.conj(fst)
    pk = (-koa.real * d1 + koa.imag * d2) * scale
    rho_c[pa, pa] += pk
    rho_c[pb, pb] -= pk


@njit(cache=True)
def matter_step_3(rho, e_cells, h0s, mus, pop_half, coh_half, mu_pol,
                  density, draws, sqrt_dt, inv_sqrt_ncell, psi_coef,
                  omega_t, rates, gammas, dgam, lvl, noise_on, pol_out):
    """Full splitting step for every 3-level cell; returns clamp count.

    ``rates`` = (r32, r23, r13, r31, r12, r21) in the canonical
    (injector, lower, upper) role order; ``lvl`` = config indices of
    (injector, lower, upper); ``psi_coef`` = -mu_ul/hbar.
    """
    m_cells = rho.shape[0]
    a = np.empty((3, 3))
    minv = np.empty((3, 3))
    rr = np.empty((3, 3))
    ss = np.empty((3, 3))
    u = np.empty((3, 3), dtype=np.complex128)
    t = np.empty((3, 3), dtype=np.complex128)
    p_scr = np.empty(3)
    r32, r23, r13, r31, r12, r21 = rates
    g23, g13, g12 = gammas
    inv_tau_up = r23 + r13
    inv_tau_in = r21 + r31
    ii, il, iu = lvl[0], lvl[1], lvl[2]
    clamps = 0
    for c in range(m_cells):
        rho_c = rho[c]
        _relax_half(rho_c, pop_half, coh_half, p_scr)
        e = e_cells[c]
        for i in range(3):
            for j in range(3):
                a[i, j] = h0s[i, j] - mus[i, j] * e
        _unitary_factors_3(a, minv, rr, ss)
        for i in range(3):
            for j in range(3):
                u[i, j] = complex(rr[i, j], ss[i, j])
        _rotate(rho_c, u, t)
        _relax_half(rho_c, pop_half, coh_half, p_scr)

        if noise_on:
            sc = sqrt_dt * inv_sqrt_ncell[c]
            d = draws[c]
            p_in = rho_c[ii, ii].real
            p_lo = rho_c[il, il].real
            p_up = rho_c[iu, iu].real
            z23 = rho_c[iu, il]
            z31 = rho_c[ii, iu]
            z21 = rho_c[ii, il]
            z23c = np.conj(z23)
            z31c = np.conj(z31)
            z21c = np.conj(z21)
            az23 = abs(z23)
            az31 = abs(z31)
            az21 = abs(z21)
            psi = psi_coef * e
            apsi = abs(psi)

            # ladders (coherence-weighted amplitudes)
            _ladder_kick(rho_c, np.sqrt(r32 * az23) + 0j, r32 * z23c,
                         il, iu, iu, il, iu, il, d[0], d[1], sc)
            _ladder_kick(rho_c, np.sqrt(r12 * az23) + 0j, -r12 * z23c,
                         il, iu, iu, il, il, ii, d[2], d[3], sc)
            _ladder_kick(rho_c, np.sqrt(r13 * az31) + 0j, -r13 * z31c,
                         iu, ii, ii, iu, iu, ii, d[4], d[5], sc)
            _ladder_kick(rho_c, np.sqrt(r23 * az31) + 0j, -r23 * z31c,
                         iu, ii, ii, iu, iu, il, d[6], d[7], sc)
            if psi != 0.0 and az21 > 0.0:
                alpha_f = 1j * (psi / apsi) * np.sqrt(apsi * az21)
                _ladder_kick(rho_c, alpha_f, 1j * psi * z21c,
                             iu, ii, ii, iu, iu, il, d[8], d[9], sc)
            _ladder_kick(rho_c, np.sqrt(r12 * az21) + 0j, -r12 * z21c,
                         il, ii, ii, il, il, ii, d[10], d[11], sc)
            _ladder_kick(rho_c, np.sqrt(r32 * az21) + 0j, r32 * z21c,
                         il, ii, ii, il, iu, il, d[12], d[13], sc)

            # population exchange draws
            var = (r23 * p_up + r32 * p_lo - 2.0 * psi * z23.imag
                   - r32 * az23 - r23 * az31 - apsi * az21 - r32 * az21)
            if var < 0.0:
                clamps += 1
                var = 0.0
            pk = np.sqrt(var) * d[14] * sc
            rho_c[iu, iu] += pk
            rho_c[il, il] -= pk
            var = r31 * p_in + r13 * (p_up - az31) + 2.0 * omega_t * z31.imag
            if var < 0.0:
                clamps += 1
                var = 0.0
            pk = np.sqrt(var) * d[15] * sc
            rho_c[iu, iu] += pk
            rho_c[ii, ii] -= pk
            var = r21 * p_in + r12 * (p_lo - az23 - az21)
            if var < 0.0:
                clamps += 1
                var = 0.0
            pk = np.sqrt(var) * d[16] * sc
            rho_c[il, il] += pk
            rho_c[ii, ii] -= pk

            # conjugate-column self terms
            f_opt = np.sqrt(-2j * psi * z23c)
            rho_c[il, iu] += f_opt * d[17] * sc
            rho_c[iu, il] += np.conj(f_opt) * d[17] * sc
            f_tun = np.sqrt(2j * omega_t * z31c)
            rho_c[iu, ii] += f_tun * d[18] * sc
            rho_c[ii, iu] += np.conj(f_tun) * d[18] * sc

            # coherence-coherence cross draws
            u1 = np.sqrt(0.5j * psi * az31)
            if u1 != 0.0:
                v1 = 1j * psi * z31c / (2.0 * u1)
                zeta = (d[19] + 1j * d[20]) * sc
                rho_c[il, iu] += u1 * zeta
                rho_c[iu, il] += np.conj(u1 * zeta)
                rho_c[iu, ii] += v1 * np.conj(zeta)
                rho_c[ii, iu] += np.conj(v1) * zeta
            u2 = np.sqrt(-0.5j * psi * az21)
            if u2 != 0.0:
                v2 = -1j * psi * z21c / (2.0 * u2)
                zeta = (d[21] + 1j * d[22]) * sc
                rho_c[il, iu] += u2 * zeta
                rho_c[iu, il] += np.conj(u2 * zeta)
                rho_c[il, ii] += v2 * np.conj(zeta)
                rho_c[ii, il] += np.conj(v2) * zeta
            u3 = np.sqrt(0.5 * dgam * az31)
            if u3 != 0.0:
                v3 = dgam * z31 / (2.0 * u3)
                zeta = (d[23] + 1j * d[24]) * sc
                rho_c[il, iu] += u3 * zeta
                rho_c[iu, il] += np.conj(u3 * zeta)
                rho_c[ii, il] += v3 * np.conj(zeta)
                rho_c[il, ii] += np.conj(v3) * zeta

            # remainder draws
            m2 = 0.5 * ((2 * g23 - inv_tau_up) * p_up + r32 * p_lo + r31 * p_in
                        - 2 * (r32 + r12) * az23 - 2 * apsi * az23
                        - apsi * az31 - apsi * az21 - dgam * az31)
            if m2 < 0.0:
                clamps += 1
                m2 = 0.0
            kick = np.sqrt(m2) * (d[25] + 1j * d[26]) * sc
            rho_c[il, iu] += kick
            rho_c[iu, il] += np.conj(kick)
            m2 = 0.5 * ((2 * g13 - inv_tau_in) * p_in + r12 * p_lo + r13 * p_up
                        - 2 * (r13 + r23) * az31 - 2 * apsi * az21
                        - 2 * abs(omega_t) * az31 - apsi * az31)
            if m2 < 0.0:
                clamps += 1
                m2 = 0.0
            kick = np.sqrt(m2) * (d[27] + 1j * d[28]) * sc
            rho_c[iu, ii] += kick
            rho_c[ii, iu] += np.conj(kick)
            m2 = 0.5 * ((2 * g12 - inv_tau_in) * p_in + r12 * p_lo + r13 * p_up
                        - 2 * (r12 + r32) * az21 - apsi * az21 - dgam * az31)
            if m2 < 0.0:
                clamps += 1
                m2 = 0.0
            kick = np.sqrt(m2) * (d[29] + 1j * d[30]) * sc
            rho_c[il, ii] += kick
            rho_c[ii, il] += np.conj(kick)

        _hermitize_cell(rho_c)
        pol = 0.0
        for i in range(3):
            for j in range(3):
                pol += mu_pol[i, j] * rho_c[j, i].real
        pol_out[c] = density * pol
    return clamps


@njit(cache=True)
def matter_step_2(rho, e_cells, h0s, mus, pop_half, coh_half, mu_pol,
                  density, draws, sqrt_dt, inv_sqrt_ncell, r_down, r_up,
                  gamma_eg, noise_on, pol_out):
    """Full splitting step for two-level cells with the reduced scheme.

    ``r_down`` is the excited->ground rate scatter[0, 1]; ``r_up`` the
    reverse; levels are (0 = ground, 1 = excited).
    """
    m_cells = rho.shape[0]
    u = np.empty((2, 2), dtype=np.complex128)
    t = np.empty((2, 2), dtype=np.complex128)
    p_scr = np.empty(2)
    clamps = 0
    for c in range(m_cells):
        rho_c = rho[c]
        _relax_half(rho_c, pop_half, coh_half, p_scr)
        e = e_cells[c]
        a00 = h0s[0, 0] - mus[0, 0] * e
        a01 = h0s[0, 1] - mus[0, 1] * e
        a11 = h0s[1, 1] - mus[1, 1] * e
        m00 = 1.0 + a00 * a00 + a01 * a01
        m01 = a01 * (a00 + a11)
        m11 = 1.0 + a11 * a11 + a01 * a01
        inv_det = 1.0 / (m00 * m11 - m01 * m01)
        i00 = m11 * inv_det
        i01 = -m01 * inv_det
        i11 = m00 * inv_det
        u[0, 0] = complex(2.0 * i00 - 1.0, -2.0 * (i00 * a00 + i01 * a01))
        u[0, 1] = complex(2.0 * i01, -2.0 * (i00 * a01 + i01 * a11))
        u[1, 0] = complex(2.0 * i01, -2.0 * (i01 * a00 + i11 * a01))
        u[1, 1] = complex(2.0 * i11 - 1.0, -2.0 * (i01 * a01 + i11 * a11))
        _rotate(rho_c, u, t)
        _relax_half(rho_c, pop_half, coh_half, p_scr)

        if noise_on:
            sc = sqrt_dt * inv_sqrt_ncell[c]
            d = draws[c]
            p_g = rho_c[0, 0].real
            p_e = rho_c[1, 1].real
            var = r_down * p_e + r_up * p_g
            if var < 0.0:
                clamps += 1
                var = 0.0
            pk = np.sqrt(var) * d[0] * sc
            rho_c[1, 1] += pk
            rho_c[0, 0] -= pk
            rad = 0.5 * ((2.0 * gamma_eg - r_up) * p_g + r_down * p_e)
            if rad < 0.0:
                clamps += 1
                rad = 0.0
            kick = np.sqrt(rad) * (d[1] + 1j * d[2]) * sc
            rho_c[0, 1] += kick          # <s_eg> lives on rho[g, e]
            rho_c[1, 0] += np.conj(kick)
        _hermitize_cell(rho_c)
        pol_out[c] = density * 2.0 * mu_pol[0, 1] * rho_c[0, 1].real
    return clamps
