"""Pure-Python hot kernels: velocity sampling and differential-drive integration.

The compiled twin in _core.pyx mirrors these functions expression for
expression. Both sides stick to +,-,*,/ and libm calls (sqrt, sin, cos,
floor, fabs) in the same order so traces hash identically regardless of
which backend ran. Keep any edit here in lockstep with _core.pyx.
"""
from __future__ import annotations

import math

TWO_PI = 6.283185307179586
TIE_EPS = 1e-12


def integrate_arc(
    x: float,
    y: float,
    theta: float,
    v_l: float,
    v_r: float,
    track_width: float,
    dt: float,
) -> tuple[float, float, float]:
    """Advance a differential-drive pose one step along its exact circular arc."""
    v = 0.5 * (v_l + v_r)
    omega = (v_r - v_l) / track_width
    if math.fabs(omega) < 1e-9:
        c = math.cos(theta)
        s = math.sin(theta)
        return (x + v * c * dt, y + v * s * dt, theta)
    radius = v / omega
    theta2 = theta + omega * dt
    nx = x + radius * (math.sin(theta2) - math.sin(theta))
    ny = y + radius * (math.cos(theta) - math.cos(theta2))
    if -math.pi <= theta2 < math.pi:
        return (nx, ny, theta2)
    return (nx, ny, theta2 - TWO_PI * math.floor((theta2 + math.pi) / TWO_PI))


def choose_velocity(
    agents,
    self_idx: int,
    pref_vx: float,
    pref_vy: float,
    max_speed: float,
    excluded_tag: int,
    tau: float,
    cull_distance: float,
    n_directions: int,
    n_magnitudes: int,
) -> tuple[float, float]:
    """Pick a collision-free velocity near the preferred one.

    agents: rows of (x, y, vx, vy, radius, reciprocity, tag). Row self_idx is
    the deciding agent; rows with tag == excluded_tag are ignored (the robot's
    own cargo). Each candidate velocity is kept only if its first contact with
    every relevant neighbor disc lies beyond tau seconds, where the contact
    test uses the reciprocity-scaled relative velocity: the deciding agent
    assumes it performs a `reciprocity` share of the avoidance.

    Feasible candidates are ranked by squared distance from the preferred
    velocity; near-ties go to the right-hand (clockwise) deviation. If nothing
    is feasible the candidate with the latest first collision wins. If a
    neighbor disc already overlaps, flee straight away from the deepest one.
    """
    sx = float(agents[self_idx, 0])
    sy = float(agents[self_idx, 1])
    svx = float(agents[self_idx, 2])
    svy = float(agents[self_idx, 3])
    sr = float(agents[self_idx, 4])

    n_rows = agents.shape[0]
    # Pass 1: cull far neighbors, detect overlaps.
    nxs: list[float] = []
    nys: list[float] = []
    nvxs: list[float] = []
    nvys: list[float] = []
    nrs: list[float] = []
    nas: list[float] = []
    worst_depth = 0.0
    flee_x = 0.0
    flee_y = 0.0
    overlapping = False
    for i in range(n_rows):
        if i == self_idx:
            continue
        tag = int(agents[i, 6])
        if tag == excluded_tag:
            continue
        ax = float(agents[i, 0])
        ay = float(agents[i, 1])
        avx = float(agents[i, 2])
        avy = float(agents[i, 3])
        dx = ax - sx
        dy = ay - sy
        dist2 = dx * dx + dy * dy
        reach = cull_distance + tau * math.sqrt(avx * avx + avy * avy)
        if dist2 > reach * reach:
            continue
        radius_sum = sr + float(agents[i, 4])
        dist = math.sqrt(dist2)
        if dist <= radius_sum:
            depth = radius_sum - dist
            if not overlapping or depth > worst_depth:
                worst_depth = depth
                if dist > 0.0:
                    flee_x = -dx / dist
                    flee_y = -dy / dist
                else:
                    flee_x = 1.0
                    flee_y = 0.0
            overlapping = True
            continue
        nxs.append(dx)
        nys.append(dy)
        nvxs.append(avx)
        nvys.append(avy)
        nrs.append(radius_sum)
        nas.append(float(agents[i, 5]))

    if overlapping:
        return (flee_x * max_speed, flee_y * max_speed)

    n_nb = len(nxs)
    if n_nb == 0:
        return (pref_vx, pref_vy)

    best_feasible = False
    best_d2 = 0.0
    best_cross = 0.0
    best_vx = 0.0
    best_vy = 0.0
    fallback_ttc = -1.0
    fallback_vx = 0.0
    fallback_vy = 0.0

    n_candidates = 2 + n_directions * n_magnitudes
    for ci in range(n_candidates):
        if ci == 0:
            cvx = pref_vx
            cvy = pref_vy
        elif ci == 1:
            cvx = 0.0
            cvy = 0.0
        else:
            k = (ci - 2) // n_magnitudes
            m = (ci - 2) % n_magnitudes + 1
            ang = (TWO_PI * k) / n_directions
            speed = (max_speed * m) / n_magnitudes
            cvx = math.cos(ang) * speed
            cvy = math.sin(ang) * speed

        # Earliest first contact across neighbors for this candidate.
        min_ttc = 1e30
        for j in range(n_nb):
            alpha = nas[j]
            ux = (cvx - (1.0 - alpha) * svx) / alpha - nvxs[j]
            uy = (cvy - (1.0 - alpha) * svy) / alpha - nvys[j]
            a = ux * ux + uy * uy
            if a < 1e-18:
                continue
            b = nxs[j] * ux + nys[j] * uy
            if b <= 0.0:
                continue
            c = nxs[j] * nxs[j] + nys[j] * nys[j] - nrs[j] * nrs[j]
            disc = b * b - a * c
            if disc <= 0.0:
                continue
            t_hit = (b - math.sqrt(disc)) / a
            if t_hit < min_ttc:
                min_ttc = t_hit

        if min_ttc > tau:
            ddx = cvx - pref_vx
            ddy = cvy - pref_vy
            d2 = ddx * ddx + ddy * ddy
            cross = pref_vx * cvy - pref_vy * cvx
            if not best_feasible:
                best_feasible = True
                best_d2 = d2
                best_cross = cross
                best_vx = cvx
                best_vy = cvy
            elif d2 < best_d2 - TIE_EPS:
                best_d2 = d2
                best_cross = cross
                best_vx = cvx
                best_vy = cvy
            elif d2 <= best_d2 + TIE_EPS and cross < best_cross:
                best_d2 = d2
                best_cross = cross
                best_vx = cvx
                best_vy = cvy
        elif not best_feasible and min_ttc > fallback_ttc:
            fallback_ttc = min_ttc
            fallback_vx = cvx
            fallback_vy = cvy

    if best_feasible:
        return (best_vx, best_vy)
    return (fallback_vx, fallback_vy)
