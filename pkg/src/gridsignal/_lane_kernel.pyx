# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=False
"""Cython lane update kernel — statement-for-statement twin of
``_lane_kernel_py.update_lane``; keep the two in lockstep.

Compiled without fast-math and with fp-contraction off so arithmetic is
bit-identical to the pure-Python fallback.
"""

from libc.math cimport INFINITY


def update_lane(
    list ids,
    double[:] pos,
    double[:] speed,
    double[:] prev_speed,
    double[:] delay,
    double[:] wait,
    double link_len,
    double vmax,
    double accel_a,
    double decel_b,
    double tau,
    double sigma,
    double dt,
    double min_gap,
    double veh_len,
    bint green,
    double x_leader_rear,
    double x_leader_speed,
    u=None,
):
    """See the pure-Python twin for the contract."""
    cdef int queued = 0
    cdef double lead_rear, lead_speed
    cdef double v, x, vd, gap, denom, vsafe, xn, cap
    cdef bint capped
    cdef int i, n, vid
    cdef double[:] u_view
    cdef bint have_u = u is not None
    if have_u:
        u_view = u

    if green:
        lead_rear = x_leader_rear
        lead_speed = x_leader_speed
    else:
        lead_rear = link_len - 1.0
        lead_speed = 0.0
    n = len(ids)
    for i in range(n):
        vid = ids[i]
        v = speed[vid]
        x = pos[vid]
        vd = v + accel_a * dt
        if vd > vmax:
            vd = vmax
        if lead_rear != INFINITY:
            gap = lead_rear - x - min_gap
            if gap < 0.0:
                gap = 0.0
            denom = (v + lead_speed) / (2.0 * decel_b) + tau
            vsafe = lead_speed + (gap - lead_speed * tau) / denom
            if vsafe < 0.0:
                vsafe = 0.0
            if vd > vsafe:
                vd = vsafe
        if sigma > 0.0:
            vd = vd - sigma * accel_a * dt * u_view[i]
        if vd < 0.0:
            vd = 0.0
        xn = x + vd * dt
        capped = False
        if i > 0:
            cap = link_len - 0.5
            if xn > cap:
                xn = cap if cap > x else x
                capped = True
        if lead_rear != INFINITY:
            cap = lead_rear - min_gap
            if xn > cap:
                xn = cap if cap > x else x
                capped = True
        if capped:
            vd = (xn - x) / dt
        prev_speed[vid] = v
        speed[vid] = vd
        pos[vid] = xn
        if vd < 0.1:
            delay[vid] += dt
            wait[vid] += dt
            queued += 1
        else:
            wait[vid] = 0.0
        lead_rear = xn - veh_len
        lead_speed = vd
    return queued
