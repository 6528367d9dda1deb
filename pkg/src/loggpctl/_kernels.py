"""Compiled scalar kernels shared by the Python API and the 4 kHz inner loop.

Everything here works on plain float arrays so the same code serves single
evaluations from Python and the specialised Cartesian-stage integrator.
"""
import math

import numpy as np
from numba import njit

# ----------------------------------------------------------------------------
# Reference: rounded rectangle, constant path speed, counter-clockwise,
# starting at (half_x, 0) relative to the centre.


@njit(cache=True)
def _segment_table(hx, hy, r):
    # kind (0 line / 1 arc), length, a0, a1, a2, a3
    # line: start (a0, a1), direction (a2, a3); arc: centre (a0, a1), start angle a2
    a = 2.0 * (hx - r)
    b = 2.0 * (hy - r)
    c = 0.5 * math.pi * r
    tab = np.empty((9, 6))
    tab[0] = (0.0, 0.5 * b, hx, 0.0, 0.0, 1.0)
    tab[1] = (1.0, c, hx - r, hy - r, 0.0, 0.0)
    tab[2] = (0.0, a, hx - r, hy, -1.0, 0.0)
    tab[3] = (1.0, c, -hx + r, hy - r, 0.5 * math.pi, 0.0)
    tab[4] = (0.0, b, -hx, hy - r, 0.0, -1.0)
    tab[5] = (1.0, c, -hx + r, -hy + r, math.pi, 0.0)
    tab[6] = (0.0, a, -hx + r, -hy, 1.0, 0.0)
    tab[7] = (1.0, c, hx - r, -hy + r, 1.5 * math.pi, 0.0)
    tab[8] = (0.0, 0.5 * b, hx, -hy + r, 0.0, 1.0)
    return tab


@njit(cache=True)
def rounded_rect_perimeter(hx, hy, r):
    return 4.0 * (hx - r) + 4.0 * (hy - r) + 2.0 * math.pi * r


@njit(cache=True)
def rounded_rect_point(t, hx, hy, r, period, cx, cy, out):
    """Write position, velocity and acceleration rows into ``out`` (3 x 2)."""
    perim = rounded_rect_perimeter(hx, hy, r)
    v = perim / period
    s = (v * t) % perim
    tab = _segment_table(hx, hy, r)
    k = 0
    while k < 8 and s >= tab[k, 1]:
        s -= tab[k, 1]
        k += 1
    if tab[k, 0] == 0.0:
        dx, dy = tab[k, 4], tab[k, 5]
        out[0, 0] = tab[k, 2] + s * dx
        out[0, 1] = tab[k, 3] + s * dy
        out[1, 0] = v * dx
        out[1, 1] = v * dy
        out[2, 0] = 0.0
        out[2, 1] = 0.0
    else:
        phi = tab[k, 4] + s / r
        cp, sp = math.cos(phi), math.sin(phi)
        out[0, 0] = tab[k, 2] + r * cp
        out[0, 1] = tab[k, 3] + r * sp
        out[1, 0] = -v * sp
        out[1, 1] = v * cp
        out[2, 0] = -v * v / r * cp
        out[2, 1] = -v * v / r * sp
    out[0, 0] += cx
    out[0, 1] += cy


# ----------------------------------------------------------------------------
# Synthetic patient, task space.  Returns the load f of the equation of motion,
# i.e. minus the force the patient exerts on the handle.


@njit(cache=True)
def patient_force(p, pd, t, p_ref, centre, stiff, damp, radial_bias, fatigue_T,
                  trem_amp, trem_freq, trem_phase, out):
    alpha = math.exp(-t / fatigue_T)
    scale = 1.0 + radial_bias
    for i in range(p.shape[0]):
        p_perc = centre[i] + scale * (p_ref[i] - centre[i])
        trem = 0.0
        for j in range(trem_freq.shape[1]):
            trem += trem_amp[i, j] * math.sin(2.0 * math.pi * trem_freq[i, j] * t + trem_phase[i, j])
        human = alpha * (stiff[i] * (p_perc - p[i]) - damp[i] * pd[i]) + trem
        out[i] = -human


# ----------------------------------------------------------------------------
# Cartesian stage (H = diag(m), C = 0, g = 0) inner loop.


@njit(cache=True)
def _stage_accel(q, qd, t, u, masses, ref_geom, ref_buf, centre, stiff, damp, bias, fat_T,
                 t_amp, t_freq, t_phase, f_buf, acc):
    rounded_rect_point(t, ref_geom[0], ref_geom[1], ref_geom[2], ref_geom[3],
                       ref_geom[4], ref_geom[5], ref_buf)
    patient_force(q, qd, t, ref_buf[0], centre, stiff, damp, bias, fat_T,
                  t_amp, t_freq, t_phase, f_buf)
    for i in range(q.shape[0]):
        acc[i] = (u[i] - f_buf[i]) / masses[i]


@njit(cache=True)
def stage_advance(q, qd, t0, n_sub, dt, masses, feedforward, kp, kd, u_max, limit,
                  ref_geom, centre, stiff, damp, bias, fat_T, t_amp, t_freq, t_phase, u_sum):
    """Integrate ``n_sub`` RK4 steps with the control law recomputed each step.

    ``q`` and ``qd`` are updated in place and the applied commands are summed
    into ``u_sum``.  Returns ``(t, failed)``; on a workspace breach the loop
    stops right after the offending step.
    """
    d = q.shape[0]
    ref = np.empty((3, d))
    rbuf = np.empty((3, d))
    fbuf = np.empty(d)
    u = np.empty(d)
    k1q = np.empty(d); k1v = np.empty(d)
    k2q = np.empty(d); k2v = np.empty(d)
    k3q = np.empty(d); k3v = np.empty(d)
    k4q = np.empty(d); k4v = np.empty(d)
    qs = np.empty(d); vs = np.empty(d)
    t = t0
    for n in range(n_sub):
        rounded_rect_point(t, ref_geom[0], ref_geom[1], ref_geom[2], ref_geom[3],
                           ref_geom[4], ref_geom[5], ref)
        for i in range(d):
            ui = (masses[i] * ref[2, i] - kp * (q[i] - ref[0, i]) - kd * (qd[i] - ref[1, i])
                  + feedforward[i])
            u[i] = min(max(ui, -u_max), u_max)
            u_sum[i] += u[i]

        for i in range(d):
            k1q[i] = qd[i]
        _stage_accel(q, qd, t, u, masses, ref_geom, rbuf, centre, stiff, damp, bias, fat_T,
                     t_amp, t_freq, t_phase, fbuf, k1v)
        for i in range(d):
            qs[i] = q[i] + 0.5 * dt * k1q[i]
            vs[i] = qd[i] + 0.5 * dt * k1v[i]
            k2q[i] = vs[i]
        _stage_accel(qs, vs, t + 0.5 * dt, u, masses, ref_geom, rbuf, centre, stiff, damp, bias,
                     fat_T, t_amp, t_freq, t_phase, fbuf, k2v)
        for i in range(d):
            qs[i] = q[i] + 0.5 * dt * k2q[i]
            vs[i] = qd[i] + 0.5 * dt * k2v[i]
            k3q[i] = vs[i]
        _stage_accel(qs, vs, t + 0.5 * dt, u, masses, ref_geom, rbuf, centre, stiff, damp, bias,
                     fat_T, t_amp, t_freq, t_phase, fbuf, k3v)
        for i in range(d):
            qs[i] = q[i] + dt * k3q[i]
            vs[i] = qd[i] + dt * k3v[i]
            k4q[i] = vs[i]
        _stage_accel(qs, vs, t + dt, u, masses, ref_geom, rbuf, centre, stiff, damp, bias,
                     fat_T, t_amp, t_freq, t_phase, fbuf, k4v)
        failed = False
        for i in range(d):
            q[i] += dt / 6.0 * (k1q[i] + 2.0 * k2q[i] + 2.0 * k3q[i] + k4q[i])
            qd[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
            if not (abs(q[i]) <= limit[i]) or not math.isfinite(qd[i]):
                failed = True
        # t0 + (n+1)*dt rather than repeated addition, so tick times stay exact multiples
        t = t0 + (n + 1) * dt
        if failed:
            return t, True
    return t, False


# ----------------------------------------------------------------------------
# Log-likelihood gradient contractions for the SE kernel.


@njit(cache=True)
def se_gradient_sums(kinv_lower, alpha, K, X):
    """Contractions of ``W = alpha alpha^T - Kinv`` needed by the SE gradient.

    ``kinv_lower`` holds the inverse in its lower triangle only.  Returns
    ``(sum(W * K), trace(W), S)`` where
    ``S[i] = sum_jk W_jk K_jk (x_ji - x_ki)^2``.  One pass over the lower
    triangle, using the symmetry of ``W`` and ``K``.
    """
    n, rho = X.shape
    wk = 0.0
    tr = 0.0
    S = np.zeros(rho)
    for j in range(n):
        w = alpha[j] * alpha[j] - kinv_lower[j, j]
        tr += w
        wk += w * K[j, j]
        for k in range(j):
            m = (alpha[j] * alpha[k] - kinv_lower[j, k]) * K[j, k]
            wk += 2.0 * m
            for i in range(rho):
                dx = X[j, i] - X[k, i]
                S[i] += 2.0 * m * dx * dx
    return wk, tr, S
