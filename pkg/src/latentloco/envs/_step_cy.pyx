# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched physics step.

Statement-for-statement mirror of `_step_py.step_batch`; keep the two in
lockstep (same operations, same order) so results agree bitwise.  Compiled
with -ffp-contract=off for that reason.
"""

from libc.math cimport cos, sin, floor


cdef double _height_at(double[:, ::1] heights, Py_ssize_t e, double px,
                       double grid_x0, double grid_dx, Py_ssize_t grid_n,
                       unsigned char linear) nogil:
    cdef double pos = (px - grid_x0) / grid_dx
    cdef Py_ssize_t i
    cdef double w
    if linear:
        i = <Py_ssize_t>floor(pos)
        if i < 0:
            i = 0
        if i > grid_n - 2:
            i = grid_n - 2
        w = pos - i
        if w < 0.0:
            w = 0.0
        if w > 1.0:
            w = 1.0
        return heights[e, i] * (1.0 - w) + heights[e, i + 1] * w
    i = <Py_ssize_t>floor(pos)
    if i < 0:
        i = 0
    if i > grid_n - 1:
        i = grid_n - 1
    return heights[e, i]


def step_batch(double[:, ::1] base, double[:, ::1] q, double[:, ::1] qd,
               double[:, ::1] contact, double[:, ::1] actions,
               unsigned char[::1] fallen,
               double[::1] hip_x, double[::1] seg_len, double[::1] q_nom,
               double joint_inertia,
               double m_total, double body_inertia, double kp, double kd,
               double tau_max, double action_scale,
               double[:, ::1] heights, unsigned char[::1] linear_interp,
               double grid_x0, double grid_dx,
               double k_contact, double c_contact, double friction_mu,
               double friction_visc, double n_max,
               double gravity, double dt, double fall_pitch, double fall_margin,
               int n_substeps):
    """Advance every env by one control step (n_substeps integrator steps)."""
    cdef Py_ssize_t n_env = base.shape[0]
    cdef Py_ssize_t n_legs = hip_x.shape[0]
    cdef Py_ssize_t n_joint = seg_len.shape[0]
    cdef Py_ssize_t grid_n = heights.shape[1]
    cdef double h = dt / n_substeps

    cdef Py_ssize_t e, leg, j, k, sub
    cdef double x, z, pitch, vx, vz, omega, ch, sh
    cdef double fx_sum, fz_sum, tq_sum
    cdef double hx, px, pz, vpx, vpz, alpha, alpha_dot, sa, ca, sl
    cdef double ht, pen, fn, ft, cap, a, tau, new_qd, ht_base

    for e in range(n_env):
        x = base[e, 0]
        z = base[e, 1]
        pitch = base[e, 2]
        vx = base[e, 3]
        vz = base[e, 4]
        omega = base[e, 5]

        for sub in range(n_substeps):
            ch = cos(pitch)
            sh = sin(pitch)

            fx_sum = 0.0
            fz_sum = 0.0
            tq_sum = 0.0
            for leg in range(n_legs):
                hx = hip_x[leg]
                px = x + hx * ch
                pz = z + hx * sh
                vpx = vx - hx * sh * omega
                vpz = vz + hx * ch * omega
                alpha = pitch
                alpha_dot = omega
                for j in range(n_joint):
                    k = leg * n_joint + j
                    alpha += q[e, k]
                    alpha_dot += qd[e, k]
                    sa = sin(alpha)
                    ca = cos(alpha)
                    sl = seg_len[j]
                    px += sl * sa
                    pz -= sl * ca
                    vpx += sl * ca * alpha_dot
                    vpz += sl * sa * alpha_dot

                ht = _height_at(heights, e, px, grid_x0, grid_dx, grid_n,
                                linear_interp[e])
                pen = ht - pz
                if pen > 0.0:
                    fn = k_contact * pen - c_contact * vpz
                    if fn < 0.0:
                        fn = 0.0
                    if fn > n_max:
                        fn = n_max
                    ft = -friction_visc * vpx
                    cap = friction_mu * fn
                    if ft > cap:
                        ft = cap
                    if ft < -cap:
                        ft = -cap
                    contact[e, leg] = fn
                    fx_sum += ft
                    fz_sum += fn
                    tq_sum += (px - x) * fn - (pz - z) * ft
                else:
                    contact[e, leg] = 0.0

            for k in range(n_legs * n_joint):
                a = actions[e, k]
                if a > action_scale:
                    a = action_scale
                if a < -action_scale:
                    a = -action_scale
                tau = kp * (q_nom[k] + a - q[e, k]) - kd * qd[e, k]
                if tau > tau_max:
                    tau = tau_max
                if tau < -tau_max:
                    tau = -tau_max
                new_qd = qd[e, k] + (tau / joint_inertia) * h
                qd[e, k] = new_qd
                q[e, k] = q[e, k] + new_qd * h

            vx += (fx_sum / m_total) * h
            vz += (fz_sum / m_total - gravity) * h
            omega += (tq_sum / body_inertia) * h
            x += vx * h
            z += vz * h
            pitch += omega * h

        base[e, 0] = x
        base[e, 1] = z
        base[e, 2] = pitch
        base[e, 3] = vx
        base[e, 4] = vz
        base[e, 5] = omega

        ht_base = _height_at(heights, e, x, grid_x0, grid_dx, grid_n,
                             linear_interp[e])
        if pitch > fall_pitch or pitch < -fall_pitch or z < ht_base + fall_margin:
            fallen[e] = 1
        else:
            fallen[e] = 0
