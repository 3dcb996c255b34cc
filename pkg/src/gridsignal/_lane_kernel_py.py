"""Pure-Python lane update kernel (fallback twin of the Cython extension).

Both kernels implement the identical statement sequence so results are
bit-for-bit equal; keep any change mirrored in ``_lane_kernel.pyx``.

Per-lane, per-tick car-following sweep, front to back. Every follower reads
its leader's post-update position and speed, so a braking wave propagates
within one tick and air gaps provably never shrink below the minimum gap
once established (and never below zero from any legal start). Two hard
position caps back the analytical argument: a vehicle never moves backward,
never passes its leader's rear minus the minimum gap, and only the lane
leader may advance beyond the link end.
"""

from __future__ import annotations

INF = float("inf")


def update_lane(
    ids: list[int],
    pos,
    speed,
    prev_speed,
    delay,
    wait,
    link_len: float,
    vmax: float,
    accel_a: float,
    decel_b: float,
    tau: float,
    sigma: float,
    dt: float,
    min_gap: float,
    veh_len: float,
    green: bool,
    x_leader_rear: float,
    x_leader_speed: float,
    u=None,
) -> int:
    """Advance every vehicle on one lane by one tick; returns queued count.

    ``ids`` lists vehicle slots front to back; the float arrays are the
    global state vectors indexed by slot. ``x_leader_rear``/``x_leader_speed``
    describe the rear vehicle of the lane leader's target lane in this
    link's frame (INF when the way ahead is clear); with ``green`` false the
    leader instead faces a virtual stopped car whose rear sits 1 m before
    the link end.
    """
    queued = 0
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
        if lead_rear != INF:
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
            vd = vd - sigma * accel_a * dt * u[i]
        if vd < 0.0:
            vd = 0.0
        xn = x + vd * dt
        capped = False
        if i > 0:
            cap = link_len - 0.5
            if xn > cap:
                xn = cap if cap > x else x
                capped = True
        if lead_rear != INF:
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
