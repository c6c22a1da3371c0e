# cython: language_level=3
"""Compiled hot kernels. Expression-for-expression twin of reference.py.

Only +,-,*,/ and libm calls in the same order as the reference, and the
extension is built with -ffp-contract=off, so both backends produce
bit-identical doubles. Keep any edit here in lockstep with reference.py.
"""
from libc.math cimport cos, fabs, floor, sin, sqrt

cdef double TWO_PI = 6.283185307179586
cdef double TIE_EPS = 1e-12

cdef enum:
    MAX_NEIGHBORS = 256


def integrate_arc(double x, double y, double theta, double v_l, double v_r,
                  double track_width, double dt):
    """Advance a differential-drive pose one step along its exact circular arc."""
    cdef double v = 0.5 * (v_l + v_r)
    cdef double omega = (v_r - v_l) / track_width
    cdef double c, s, radius, theta2, nx, ny
    if fabs(omega) < 1e-9:
        c = cos(theta)
        s = sin(theta)
        return (x + v * c * dt, y + v * s * dt, theta)
    radius = v / omega
    theta2 = theta + omega * dt
    nx = x + radius * (sin(theta2) - sin(theta))
    ny = y + radius * (cos(theta) - cos(theta2))
    if -3.141592653589793 <= theta2 < 3.141592653589793:
        return (nx, ny, theta2)
    return (nx, ny, theta2 - TWO_PI * floor((theta2 + 3.141592653589793) / TWO_PI))


def choose_velocity(double[:, ::1] agents, int self_idx, double pref_vx,
                    double pref_vy, double max_speed, int excluded_tag,
                    double tau, double cull_distance, int n_directions,
                    int n_magnitudes):
    """Pick a collision-free velocity near the preferred one. See reference.py."""
    cdef double sx = agents[self_idx, 0]
    cdef double sy = agents[self_idx, 1]
    cdef double svx = agents[self_idx, 2]
    cdef double svy = agents[self_idx, 3]
    cdef double sr = agents[self_idx, 4]

    cdef int n_rows = agents.shape[0]
    if n_rows > MAX_NEIGHBORS:
        raise ValueError("too many agents for the compiled kernel")

    cdef double nxs[MAX_NEIGHBORS]
    cdef double nys[MAX_NEIGHBORS]
    cdef double nvxs[MAX_NEIGHBORS]
    cdef double nvys[MAX_NEIGHBORS]
    cdef double nrs[MAX_NEIGHBORS]
    cdef double nas[MAX_NEIGHBORS]

    cdef double worst_depth = 0.0
    cdef double flee_x = 0.0
    cdef double flee_y = 0.0
    cdef bint overlapping = False
    cdef int n_nb = 0
    cdef int i, tag
    cdef double ax, ay, avx, avy, dx, dy, dist2, reach, radius_sum, dist, depth

    for i in range(n_rows):
        if i == self_idx:
            continue
        tag = <int> agents[i, 6]
        if tag == excluded_tag:
            continue
        ax = agents[i, 0]
        ay = agents[i, 1]
        avx = agents[i, 2]
        avy = agents[i, 3]
        dx = ax - sx
        dy = ay - sy
        dist2 = dx * dx + dy * dy
        reach = cull_distance + tau * sqrt(avx * avx + avy * avy)
        if dist2 > reach * reach:
            continue
        radius_sum = sr + agents[i, 4]
        dist = sqrt(dist2)
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
        nxs[n_nb] = dx
        nys[n_nb] = dy
        nvxs[n_nb] = avx
        nvys[n_nb] = avy
        nrs[n_nb] = radius_sum
        nas[n_nb] = agents[i, 5]
        n_nb += 1

    if overlapping:
        return (flee_x * max_speed, flee_y * max_speed)

    if n_nb == 0:
        return (pref_vx, pref_vy)

    cdef bint best_feasible = False
    cdef double best_d2 = 0.0
    cdef double best_cross = 0.0
    cdef double best_vx = 0.0
    cdef double best_vy = 0.0
    cdef double fallback_ttc = -1.0
    cdef double fallback_vx = 0.0
    cdef double fallback_vy = 0.0

    cdef int n_candidates = 2 + n_directions * n_magnitudes
    cdef int ci, k, m, j
    cdef double cvx, cvy, ang, speed, min_ttc
    cdef double alpha, ux, uy, a, b, c, disc, t_hit, ddx, ddy, d2, cross

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
            cvx = cos(ang) * speed
            cvy = sin(ang) * speed

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
            t_hit = (b - sqrt(disc)) / a
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
