"""Compiled inner loops for trajectory integration.

Every kernel advances a state in place for a fixed number of steps and
is a pure function of its inputs (noise enters as pre-drawn arrays), so
results are bit-reproducible.  ``fastmath`` stays off to keep IEEE
semantics identical across runs and worker processes.  Complex
amplitudes are carried as separate real/imaginary arrays, which lets
LLVM vectorize the site loops.

The reference right-hand sides live in :mod:`excichain.model`; tests
assert agreement between the two implementations.
"""

import numba as nb
import numpy as np

_JIT = {"cache": True, "fastmath": False}


@nb.njit(inline="always")
def _deriv(u, p, br, bi, E0, J0, mask, kappa, beta, chi_E, chi_J,
           M, hbar, gamma_r, Gamma, sink, du, dp, dbr, dbi):
    L = u.shape[0]
    inv_M = 1.0 / M
    inv_h = 1.0 / hbar
    for n in range(L):
        nm = n - 1 if n > 0 else L - 1
        np1 = n + 1 if n < L - 1 else 0
        sp = u[np1] - u[n]
        sm = u[nm] - u[n]
        f = kappa * (sp + sm) + beta * (sp * sp * sp + sm * sm * sm)
        # d<H>/du_n of the coupling terms telescopes bond by bond
        re_right = br[np1] * br[n] + bi[np1] * bi[n]
        re_left = br[n] * br[nm] + bi[n] * bi[nm]
        f += 2.0 * chi_J * (mask[n] * re_right - mask[nm] * re_left)
        f += chi_E * ((br[np1] * br[np1] + bi[np1] * bi[np1])
                      - (br[nm] * br[nm] + bi[nm] * bi[nm]))
        du[n] = p[n] * inv_M
        dp[n] = f
        eps = E0[n] + chi_E * (u[np1] - u[nm])
        Jr = mask[n] * (J0[n] + chi_J * (u[np1] - u[n]))
        Jl = mask[nm] * (J0[nm] + chi_J * (u[n] - u[nm]))
        ar = eps * br[n] + Jr * br[np1] + Jl * br[nm]
        ai = eps * bi[n] + Jr * bi[np1] + Jl * bi[nm]
        # (d/dt) b = -i/hbar * a  with a the Hamiltonian amplitude
        gr = ai * inv_h
        gi = -ar * inv_h
        if gamma_r > 0.0 or n == sink:
            loss = gamma_r + (Gamma if n == sink else 0.0)
            gr -= loss * br[n]
            gi -= loss * bi[n]
        dbr[n] = gr
        dbi[n] = gi


@nb.njit(inline="always")
def _occ_norm(br, bi, sink):
    nrm = 0.0
    for n in range(br.shape[0]):
        nrm += br[n] * br[n] + bi[n] * bi[n]
    occ = 0.0
    if sink >= 0:
        occ = br[sink] * br[sink] + bi[sink] * bi[sink]
    return occ, nrm


@nb.njit(**_JIT)
def rk4_closed(u, p, br, bi, E0, J0, mask, kappa, beta, chi_E, chi_J,
               M, hbar, dt, n_steps):
    """Advance the closed coupled system by ``n_steps`` RK4 steps in place."""
    L = u.shape[0]
    du1 = np.empty(L); dp1 = np.empty(L); dr1 = np.empty(L); di1 = np.empty(L)
    du2 = np.empty(L); dp2 = np.empty(L); dr2 = np.empty(L); di2 = np.empty(L)
    du3 = np.empty(L); dp3 = np.empty(L); dr3 = np.empty(L); di3 = np.empty(L)
    du4 = np.empty(L); dp4 = np.empty(L); dr4 = np.empty(L); di4 = np.empty(L)
    ut = np.empty(L); pt = np.empty(L); rt = np.empty(L); it = np.empty(L)
    half = 0.5 * dt
    sixth = dt / 6.0
    for _ in range(n_steps):
        _deriv(u, p, br, bi, E0, J0, mask, kappa, beta, chi_E, chi_J,
               M, hbar, 0.0, 0.0, -1, du1, dp1, dr1, di1)
        for n in range(L):
            ut[n] = u[n] + half * du1[n]
            pt[n] = p[n] + half * dp1[n]
            rt[n] = br[n] + half * dr1[n]
            it[n] = bi[n] + half * di1[n]
        _deriv(ut, pt, rt, it, E0, J0, mask, kappa, beta, chi_E, chi_J,
               M, hbar, 0.0, 0.0, -1, du2, dp2, dr2, di2)
        for n in range(L):
            ut[n] = u[n] + half * du2[n]
            pt[n] = p[n] + half * dp2[n]
            rt[n] = br[n] + half * dr2[n]
            it[n] = bi[n] + half * di2[n]
        _deriv(ut, pt, rt, it, E0, J0, mask, kappa, beta, chi_E, chi_J,
               M, hbar, 0.0, 0.0, -1, du3, dp3, dr3, di3)
        for n in range(L):
            ut[n] = u[n] + dt * du3[n]
            pt[n] = p[n] + dt * dp3[n]
            rt[n] = br[n] + dt * dr3[n]
            it[n] = bi[n] + dt * di3[n]
        _deriv(ut, pt, rt, it, E0, J0, mask, kappa, beta, chi_E, chi_J,
               M, hbar, 0.0, 0.0, -1, du4, dp4, dr4, di4)
        for n in range(L):
            u[n] += sixth * (du1[n] + 2.0 * du2[n] + 2.0 * du3[n] + du4[n])
            p[n] += sixth * (dp1[n] + 2.0 * dp2[n] + 2.0 * dp3[n] + dp4[n])
            br[n] += sixth * (dr1[n] + 2.0 * dr2[n] + 2.0 * dr3[n] + dr4[n])
            bi[n] += sixth * (di1[n] + 2.0 * di2[n] + 2.0 * di3[n] + di4[n])


@nb.njit(**_JIT)
def rk4_open(u, p, br, bi, E0, J0, mask, kappa, beta, chi_E, chi_J,
             M, hbar, gamma_r, Gamma, sink, dt, n_steps, acc):
    """Advance the open (norm-losing) coupled system in place.

    ``acc`` (length 2) accumulates the quadratures of the sink
    occupation |b_sink|^2 and of the total norm, integrated as extra
    state variables by the same RK4 stages, so the norm-loss bookkeeping
    identity holds to integrator accuracy.
    """
    L = u.shape[0]
    du1 = np.empty(L); dp1 = np.empty(L); dr1 = np.empty(L); di1 = np.empty(L)
    du2 = np.empty(L); dp2 = np.empty(L); dr2 = np.empty(L); di2 = np.empty(L)
    du3 = np.empty(L); dp3 = np.empty(L); dr3 = np.empty(L); di3 = np.empty(L)
    du4 = np.empty(L); dp4 = np.empty(L); dr4 = np.empty(L); di4 = np.empty(L)
    ut = np.empty(L); pt = np.empty(L); rt = np.empty(L); it = np.empty(L)
    half = 0.5 * dt
    sixth = dt / 6.0
    for _ in range(n_steps):
        _deriv(u, p, br, bi, E0, J0, mask, kappa, beta, chi_E, chi_J,
               M, hbar, gamma_r, Gamma, sink, du1, dp1, dr1, di1)
        occ1, nrm1 = _occ_norm(br, bi, sink)
        for n in range(L):
            ut[n] = u[n] + half * du1[n]
            pt[n] = p[n] + half * dp1[n]
            rt[n] = br[n] + half * dr1[n]
            it[n] = bi[n] + half * di1[n]
        _deriv(ut, pt, rt, it, E0, J0, mask, kappa, beta, chi_E, chi_J,
               M, hbar, gamma_r, Gamma, sink, du2, dp2, dr2, di2)
        occ2, nrm2 = _occ_norm(rt, it, sink)
        for n in range(L):
            ut[n] = u[n] + half * du2[n]
            pt[n] = p[n] + half * dp2[n]
            rt[n] = br[n] + half * dr2[n]
            it[n] = bi[n] + half * di2[n]
        _deriv(ut, pt, rt, it, E0, J0, mask, kappa, beta, chi_E, chi_J,
               M, hbar, gamma_r, Gamma, sink, du3, dp3, dr3, di3)
        occ3, nrm3 = _occ_norm(rt, it, sink)
        for n in range(L):
            ut[n] = u[n] + dt * du3[n]
            pt[n] = p[n] + dt * dp3[n]
            rt[n] = br[n] + dt * dr3[n]
            it[n] = bi[n] + dt * di3[n]
        _deriv(ut, pt, rt, it, E0, J0, mask, kappa, beta, chi_E, chi_J,
               M, hbar, gamma_r, Gamma, sink, du4, dp4, dr4, di4)
        occ4, nrm4 = _occ_norm(rt, it, sink)
        acc[0] += sixth * (occ1 + 2.0 * occ2 + 2.0 * occ3 + occ4)
        acc[1] += sixth * (nrm1 + 2.0 * nrm2 + 2.0 * nrm3 + nrm4)
        for n in range(L):
            u[n] += sixth * (du1[n] + 2.0 * du2[n] + 2.0 * du3[n] + du4[n])
            p[n] += sixth * (dp1[n] + 2.0 * dp2[n] + 2.0 * dp3[n] + dp4[n])
            br[n] += sixth * (dr1[n] + 2.0 * dr2[n] + 2.0 * dr3[n] + dr4[n])
            bi[n] += sixth * (di1[n] + 2.0 * di2[n] + 2.0 * di3[n] + di4[n])


@nb.njit(inline="always")
def _lattice_force(u, kappa, beta, out):
    L = u.shape[0]
    for n in range(L):
        nm = n - 1 if n > 0 else L - 1
        np1 = n + 1 if n < L - 1 else 0
        sp = u[np1] - u[n]
        sm = u[nm] - u[n]
        out[n] = kappa * (sp + sm) + beta * (sp * sp * sp + sm * sm * sm)


@nb.njit(**_JIT)
def heun_langevin(u, p, noise, kappa, beta, M, alpha, sigma, dt):
    """Stochastic Heun steps of the thermostatted lattice, in place.

    ``noise`` holds one standard normal per site per step; ``sigma`` is
    the std of a single momentum increment, sqrt(2 alpha T M dt).
    """
    n_steps = noise.shape[0]
    L = u.shape[0]
    f0 = np.empty(L)
    f1 = np.empty(L)
    u1 = np.empty(L)
    p1 = np.empty(L)
    inv_M = 1.0 / M
    for s in range(n_steps):
        _lattice_force(u, kappa, beta, f0)
        for n in range(L):
            w = sigma * noise[s, n]
            u1[n] = u[n] + dt * p[n] * inv_M
            p1[n] = p[n] + dt * (f0[n] - alpha * p[n]) + w
        _lattice_force(u1, kappa, beta, f1)
        for n in range(L):
            w = sigma * noise[s, n]
            u[n] += 0.5 * dt * (p[n] + p1[n]) * inv_M
            p[n] += 0.5 * dt * ((f0[n] - alpha * p[n]) + (f1[n] - alpha * p1[n])) + w


@nb.njit(**_JIT)
def heun_langevin_coupled(u, p, br, bi, noise, E0, J0, mask, kappa, beta,
                          chi_E, chi_J, M, hbar, alpha, sigma, dt):
    """Thermostatted Heun steps of the full coupled system, in place.

    Used to prepare equilibrium states of the interacting system; the
    quantum amplitudes follow the same predictor-corrector drift (their
    norm drifts at O(dt^2) per step and is renormalized by the caller
    after the preparation phase).
    """
    n_steps = noise.shape[0]
    L = u.shape[0]
    du0 = np.empty(L); dp0 = np.empty(L); dr0 = np.empty(L); di0 = np.empty(L)
    du1 = np.empty(L); dp1 = np.empty(L); dr1 = np.empty(L); di1 = np.empty(L)
    u1 = np.empty(L); p1 = np.empty(L); r1 = np.empty(L); i1 = np.empty(L)
    for s in range(n_steps):
        _deriv(u, p, br, bi, E0, J0, mask, kappa, beta, chi_E, chi_J,
               M, hbar, 0.0, 0.0, -1, du0, dp0, dr0, di0)
        for n in range(L):
            w = sigma * noise[s, n]
            u1[n] = u[n] + dt * du0[n]
            p1[n] = p[n] + dt * (dp0[n] - alpha * p[n]) + w
            r1[n] = br[n] + dt * dr0[n]
            i1[n] = bi[n] + dt * di0[n]
        _deriv(u1, p1, r1, i1, E0, J0, mask, kappa, beta, chi_E, chi_J,
               M, hbar, 0.0, 0.0, -1, du1, dp1, dr1, di1)
        for n in range(L):
            w = sigma * noise[s, n]
            u[n] += 0.5 * dt * (du0[n] + du1[n])
            p[n] += 0.5 * dt * ((dp0[n] - alpha * p[n]) + (dp1[n] - alpha * p1[n])) + w
            br[n] += 0.5 * dt * (dr0[n] + dr1[n])
            bi[n] += 0.5 * dt * (di0[n] + di1[n])


@nb.njit(inline="always")
def _static_deriv(br, bi, E0, J0m, hbar, gamma_r, Gamma, sink, dbr, dbi):
    L = br.shape[0]
    inv_h = 1.0 / hbar
    for n in range(L):
        nm = n - 1 if n > 0 else L - 1
        np1 = n + 1 if n < L - 1 else 0
        ar = E0[n] * br[n] + J0m[n] * br[np1] + J0m[nm] * br[nm]
        ai = E0[n] * bi[n] + J0m[n] * bi[np1] + J0m[nm] * bi[nm]
        gr = ai * inv_h
        gi = -ar * inv_h
        if gamma_r > 0.0 or n == sink:
            loss = gamma_r + (Gamma if n == sink else 0.0)
            gr -= loss * br[n]
            gi -= loss * bi[n]
        dbr[n] = gr
        dbi[n] = gi


@nb.njit(**_JIT)
def dephasing_advance(br, bi, noise, phase_scale, E0, J0m, hbar,
                      gamma_r, Gamma, sink, dt, acc):
    """Stochastic site-energy (pure dephasing) steps, in place.

    Each step applies an exact unitary phase rotation with independent
    Gaussian angles ``phase_scale * noise[s, n]`` and then one RK4 step
    of the static (possibly norm-losing) tight-binding generator.
    ``J0m`` is the bond amplitude with the bond mask already applied.
    ``acc`` accumulates sink-occupation and norm quadratures as in
    :func:`rk4_open`.
    """
    n_steps = noise.shape[0]
    L = br.shape[0]
    r1 = np.empty(L); i1 = np.empty(L)
    r2 = np.empty(L); i2 = np.empty(L)
    r3 = np.empty(L); i3 = np.empty(L)
    r4 = np.empty(L); i4 = np.empty(L)
    rt = np.empty(L); it = np.empty(L)
    half = 0.5 * dt
    sixth = dt / 6.0
    for s in range(n_steps):
        for n in range(L):
            th = phase_scale * noise[s, n]
            c = np.cos(th)
            si = np.sin(th)
            vr = br[n] * c + bi[n] * si
            bi[n] = bi[n] * c - br[n] * si
            br[n] = vr
        _static_deriv(br, bi, E0, J0m, hbar, gamma_r, Gamma, sink, r1, i1)
        occ1, nrm1 = _occ_norm(br, bi, sink)
        for n in range(L):
            rt[n] = br[n] + half * r1[n]
            it[n] = bi[n] + half * i1[n]
        _static_deriv(rt, it, E0, J0m, hbar, gamma_r, Gamma, sink, r2, i2)
        occ2, nrm2 = _occ_norm(rt, it, sink)
        for n in range(L):
            rt[n] = br[n] + half * r2[n]
            it[n] = bi[n] + half * i2[n]
        _static_deriv(rt, it, E0, J0m, hbar, gamma_r, Gamma, sink, r3, i3)
        occ3, nrm3 = _occ_norm(rt, it, sink)
        for n in range(L):
            rt[n] = br[n] + dt * r3[n]
            it[n] = bi[n] + dt * i3[n]
        _static_deriv(rt, it, E0, J0m, hbar, gamma_r, Gamma, sink, r4, i4)
        occ4, nrm4 = _occ_norm(rt, it, sink)
        acc[0] += sixth * (occ1 + 2.0 * occ2 + 2.0 * occ3 + occ4)
        acc[1] += sixth * (nrm1 + 2.0 * nrm2 + 2.0 * nrm3 + nrm4)
        for n in range(L):
            br[n] += sixth * (r1[n] + 2.0 * r2[n] + 2.0 * r3[n] + r4[n])
            bi[n] += sixth * (i1[n] + 2.0 * i2[n] + 2.0 * i3[n] + i4[n])
