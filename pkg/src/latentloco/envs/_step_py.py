"""Pure-Python batched physics step (fallback for the compiled kernel).

Semi-implicit Euler on planar rigid bodies with serial-chain legs and
spring-damper ground contact against a per-env heightfield.  The arithmetic
here is mirrored statement-for-statement by `_step_cy.pyx`; keep the two in
lockstep (same operations, same order) so results agree bitwise.
"""

import math


def step_batch(base, q, qd, contact, actions, fallen,
               hip_x, seg_len, q_nom, joint_inertia,
               m_total, body_inertia, kp, kd, tau_max, action_scale,
               heights, linear_interp, grid_x0, grid_dx,
               k_contact, c_contact, friction_mu, friction_visc, n_max,
               gravity, dt, fall_pitch, fall_margin, n_substeps):
    """Advance every env by one control step (n_substeps integrator steps).

    base: (n,6) [x, z, pitch, vx, vz, omega]; q/qd/actions: (n,A);
    contact: (n,L) out (normal force per leg, last substep); fallen: (n,)
    uint8 out; heights: (n,G); linear_interp: (n,) uint8.
    """
    n_env = base.shape[0]
    n_legs = hip_x.shape[0]
    n_joint = seg_len.shape[0]
    grid_n = heights.shape[1]
    h = dt / n_substeps

    for e in range(n_env):
        x = float(base[e, 0])
        z = float(base[e, 1])
        pitch = float(base[e, 2])
        vx = float(base[e, 3])
        vz = float(base[e, 4])
        omega = float(base[e, 5])

        for _ in range(n_substeps):
            ch = math.cos(pitch)
            sh = math.sin(pitch)

            fx_sum = 0.0
            fz_sum = 0.0
            tq_sum = 0.0
            for leg in range(n_legs):
                hx = float(hip_x[leg])
                px = x + hx * ch
                pz = z + hx * sh
                vpx = vx - hx * sh * omega
                vpz = vz + hx * ch * omega
                alpha = pitch
                alpha_dot = omega
                for j in range(n_joint):
                    k = leg * n_joint + j
                    alpha += float(q[e, k])
                    alpha_dot += float(qd[e, k])
                    sa = math.sin(alpha)
                    ca = math.cos(alpha)
                    sl = float(seg_len[j])
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
                a = float(actions[e, k])
                if a > action_scale:
                    a = action_scale
                if a < -action_scale:
                    a = -action_scale
                tau = kp * (float(q_nom[k]) + a - float(q[e, k])) - kd * float(qd[e, k])
                if tau > tau_max:
                    tau = tau_max
                if tau < -tau_max:
                    tau = -tau_max
                new_qd = float(qd[e, k]) + (tau / joint_inertia) * h
                qd[e, k] = new_qd
                q[e, k] = float(q[e, k]) + new_qd * h

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


def _height_at(heights, e, px, grid_x0, grid_dx, grid_n, linear):
    pos = (px - grid_x0) / grid_dx
    if linear:
        i = int(math.floor(pos))
        if i < 0:
            i = 0
        if i > grid_n - 2:
            i = grid_n - 2
        w = pos - i
        if w < 0.0:
            w = 0.0
        if w > 1.0:
            w = 1.0
        return float(heights[e, i]) * (1.0 - w) + float(heights[e, i + 1]) * w
    i = int(math.floor(pos))
    if i < 0:
        i = 0
    if i > grid_n - 1:
        i = grid_n - 1
    return float(heights[e, i])
