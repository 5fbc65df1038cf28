"""Ground-user motion: inertial speed, epsilon-greedy 4-directional heading.

Users keep their heading with probability gu_greedy_eps; otherwise they turn
by one of {1, 2, 3} quarter turns chosen uniformly. Positions that would leave
the AoI are reflected off the wall and the heading is mirrored on that axis.
"""

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def update_speed(prev_speed, cfg):
    """v_t = k1 * v_{t-1} + (1 - k1) * v_mean."""
    return cfg.gu_inertia * prev_speed + (1.0 - cfg.gu_inertia) * cfg.gu_mean_speed


def update_heading(prev_heading, cfg, rng):
    """Keep the heading with probability eps, else turn by 1..3 steer angles."""
    if rng.random() < cfg.gu_greedy_eps:
        return prev_heading % TWO_PI
    k2 = int(rng.integers(1, 4))
    return (prev_heading + cfg.steer_angle * k2) % TWO_PI


def _reflect(coord, size):
    """Mirror a coordinate that crossed [0, size]; returns (coord, flipped)."""
    flipped = False
    # a slot displacement may straddle the wall more than once only if v*tau > size
    while coord < 0.0 or coord > size:
        if coord < 0.0:
            coord = -coord
        else:
            coord = 2.0 * size - coord
        flipped = not flipped
    return coord, flipped


def step_gu(gu, cfg, rng):
    """Advance one user by one slot; returns an updated copy."""
    out = gu.copy()
    out.speed = update_speed(gu.speed, cfg)
    out.heading = update_heading(gu.heading, cfg, rng)
    size = cfg.aoi_size
    x = gu.pos[0] + out.speed * cfg.slot_tau * math.cos(out.heading)
    y = gu.pos[1] + out.speed * cfg.slot_tau * math.sin(out.heading)
    x, flip_x = _reflect(x, size)
    y, flip_y = _reflect(y, size)
    if flip_x:   # mirror the heading on the wall axis that was crossed
        out.heading = (math.pi - out.heading) % TWO_PI
    if flip_y:
        out.heading = (-out.heading) % TWO_PI
    out.pos = np.array([x, y])
    return out
