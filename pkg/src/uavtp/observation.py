"""The agent's three-channel K x K input tensor.

Channel 1: coverage map, |h| of every covered user accumulated at its cell.
Channel 2: service-count map.
Channel 3: N-step moving-trend prediction built from the buffer-map
difference, directional detection kernels, and a decayed propagation
(stochastic walkers or their exact expectation).

Matrices are indexed [x, y] (column-major in grid terms); every channel is
max-normalized to [0, 1], all-zero matrices pass through unchanged.
"""

from dataclasses import dataclass

import numpy as np

from . import channel as ch
from .environment import buffer_grid
from .world import pos_to_cell

#: Direction kernels (2-tap differences) used by detect_directions.
KERNEL_U = np.array([1.0, -1.0])
KERNEL_D = np.array([-1.0, 1.0])
KERNEL_L = np.array([1.0, -1.0])
KERNEL_R = np.array([-1.0, 1.0])

#: Propagation offsets per direction name, x east / y north.
DIRECTION_OFFSETS = {"U": (0, 1), "D": (0, -1), "L": (-1, 0), "R": (1, 0)}
DIRECTIONS = ("U", "D", "L", "R")


@dataclass
class Observation:
    t1: np.ndarray
    t2: np.ndarray
    t3: np.ndarray

    def tensor(self):
        """3 x K x K stack, channels first."""
        return np.stack([self.t1, self.t2, self.t3])


def _max_normalize(m):
    peak = m.max()
    return m / peak if peak > 0 else m


def build_channel1(world, samples, cfg):
    """Coverage channel: sum of |h| per cell over covered users, max-normalized."""
    t1 = np.zeros((cfg.grid_k, cfg.grid_k))
    for gu, sample in zip(world.gus, samples):
        if ch.coverage_ok(gu.pos, world.uav.cell, abs(sample.small_scale), cfg):
            cx, cy = pos_to_cell(gu.pos, cfg)
            t1[cx, cy] += sample.coeff_mag
    return _max_normalize(t1)


def build_channel2(world, cfg):
    """Interaction channel: summed service counts per cell, max-normalized."""
    t2 = np.zeros((cfg.grid_k, cfg.grid_k))
    for gu in world.gus:
        cx, cy = pos_to_cell(gu.pos, cfg)
        t2[cx, cy] += gu.served_count
    return _max_normalize(t2)


def diff_grid(g_now, g_prev):
    """Elementwise buffer-map change between adjacent slots."""
    if g_now.shape != g_prev.shape:
        raise ValueError(f"shape mismatch: {g_now.shape} vs {g_prev.shape}")
    return g_now - g_prev


def detect_directions(dg):
    """SAME zero-padded directional detection of the difference map.

    Each output is the 2-tap kernel response anchored so that a one-cell
    move in the matching direction yields its full response (2B) at the
    departed cell for R/U and at the arrival cell for L/D; the opposing
    pair is the exact negation, so positive parts never overlap.
    Returns (g_u, g_d, g_l, g_r).
    """
    g_r = np.zeros_like(dg)
    g_u = np.zeros_like(dg)
    # response = neighbor(+x or +y) - here; out-of-grid neighbors read as 0
    g_r[:-1, :] = dg[1:, :]
    g_r -= dg
    g_u[:, :-1] = dg[:, 1:]
    g_u -= dg
    return g_u, -g_u, -g_r, g_r


def trend_matrix(seed_matrix, direction, cfg, rng=None, mode=None, normalize=True):
    """Decayed N-step propagation of positive detections in one direction.

    Stochastic mode follows one walker per nonzero seed cell: each step it
    moves forward with probability gu_greedy_eps, else uniformly one of the
    other three directions, depositing trend_gamma times its current value
    and carrying the deposited amount onward; walkers leaving the grid stop.
    Expectation mode propagates the full mass distribution with weights
    gamma*eps forward and gamma*(1-eps)/3 sideways/backward, dropping
    out-of-grid mass. The result is max-normalized unless normalize=False.
    """
    mode = mode or cfg.trend_mode
    seeds = np.where(seed_matrix > 0, seed_matrix, 0.0)
    k = seed_matrix.shape[0]
    out = seeds.copy()
    n = cfg.trend_steps
    gamma = cfg.trend_gamma
    eps = cfg.gu_greedy_eps
    fwd = DIRECTION_OFFSETS[direction]
    others = [off for name, off in DIRECTION_OFFSETS.items() if name != direction]

    if mode == "stochastic":
        if rng is None and eps < 1.0:
            raise ValueError("stochastic trend propagation needs an rng")
        for m, nn in zip(*np.nonzero(seeds)):
            x, y = int(m), int(nn)
            value = seeds[x, y]
            for _ in range(n):
                if eps >= 1.0 or rng.random() < eps:
                    dx, dy = fwd
                else:
                    dx, dy = others[int(rng.integers(3))]
                x, y = x + dx, y + dy
                if not (0 <= x < k and 0 <= y < k):
                    break
                value *= gamma
                out[x, y] += value
    elif mode == "expectation":
        mass = seeds
        for _ in range(n):
            nxt = np.zeros_like(mass)
            for (dx, dy), w in [(fwd, gamma * eps)] + [(o, gamma * (1.0 - eps) / 3.0)
                                                       for o in others]:
                _shift_into(nxt, mass, dx, dy, w)
            out += nxt
            mass = nxt
    else:
        raise ValueError(f"unknown trend mode {mode!r}")
    return _max_normalize(out) if normalize else out


def _shift_into(dst, src, dx, dy, weight):
    """dst += weight * src shifted by (dx, dy); mass pushed off-grid is dropped."""
    k = src.shape[0]
    sx = slice(max(dx, 0), k + min(dx, 0))
    ox = slice(max(-dx, 0), k + min(-dx, 0))
    sy = slice(max(dy, 0), k + min(dy, 0))
    oy = slice(max(-dy, 0), k + min(-dy, 0))
    dst[sx, sy] += weight * src[ox, oy]


def build_channel3(world, cfg, rng=None, g_now=None):
    """Trend channel: sum of the four directional predictions, max-normalized."""
    if g_now is None:
        g_now = buffer_grid(world, cfg)
    dg = diff_grid(g_now, world.prev_buffer_grid)
    g_u, g_d, g_l, g_r = detect_directions(dg)
    total = np.zeros_like(dg)
    for seed, direction in ((g_u, "U"), (g_d, "D"), (g_l, "L"), (g_r, "R")):
        total += trend_matrix(seed, direction, cfg, rng=rng)
    return _max_normalize(total)


def build_observation(world, samples, cfg):
    """Stack the three channels for the current world state."""
    return Observation(t1=build_channel1(world, samples, cfg),
                       t2=build_channel2(world, cfg),
                       t3=build_channel3(world, cfg, rng=world.rng.get("trend")))
