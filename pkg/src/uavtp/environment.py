"""The per-slot decision process: apply a UAV move, serve covered users,
update buffers, energy, fairness, and emit the immediate reward.

Reward = Jain-weighted slot throughput when at least one user is in coverage
and the energy budget holds, else 0.
"""

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import channel as ch
from . import mobility
from .world import pos_to_cell


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    RIGHT_UPPER = 4
    RIGHT_LOWER = 5
    LEFT_UPPER = 6
    LEFT_LOWER = 7


#: Unit cell offsets (dx, dy) per action, x east / y north.
ACTION_OFFSETS = {
    Action.UP: (0, 1),
    Action.DOWN: (0, -1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
    Action.RIGHT_UPPER: (1, 1),
    Action.RIGHT_LOWER: (1, -1),
    Action.LEFT_UPPER: (-1, 1),
    Action.LEFT_LOWER: (-1, -1),
}

N_ACTIONS = len(Action)


@dataclass
class StepOutcome:
    reward: float
    utility: float
    fairness: float
    served_ids: set
    throughput_bits: float
    energy_spent: float
    done: bool
    done_reason: str | None
    samples: list = field(repr=False, default_factory=list)


def jain_fairness(counts):
    """(sum c)^2 / (n * sum c^2); 0 when every count is 0."""
    if len(counts) == 0:
        raise ValueError("fairness of an empty set is undefined")
    total = float(sum(counts))
    if total == 0.0:
        return 0.0
    sq = float(sum(c * c for c in counts))
    return total * total / (len(counts) * sq)


def flight_energy(from_cell, to_cell, cfg):
    """Energy of one inter-waypoint move."""
    d = math.hypot(to_cell[0] - from_cell[0], to_cell[1] - from_cell[1]) * cfg.cell_size
    return cfg.fly_power * d / cfg.uav_speed


def move_uav(cell, action, cfg):
    """Next waypoint after an action, clipped to the grid per axis."""
    dx, dy = ACTION_OFFSETS[Action(action)]
    k = cfg.grid_k
    return (min(max(cell[0] + dx, 0), k - 1), min(max(cell[1] + dy, 0), k - 1))


def buffer_grid(world, cfg):
    """K x K map of summed buffer bits per cell."""
    g = np.zeros((cfg.grid_k, cfg.grid_k))
    for gu in world.gus:
        cx, cy = pos_to_cell(gu.pos, cfg)
        g[cx, cy] += gu.buffer_bits
    return g


def step(world, action, cfg):
    """Advance the world by one slot in place; returns a StepOutcome.

    Order: UAV move -> flight energy -> user motion -> channel draws and
    service -> buffers/counters -> utility and reward -> termination check.
    """
    if world.done:
        raise RuntimeError("stepping a terminal world")

    g_before = buffer_grid(world, cfg)

    old_cell = world.uav.cell
    new_cell = move_uav(old_cell, action, cfg)
    spent = flight_energy(old_cell, new_cell, cfg)
    world.uav.cell = new_cell
    world.uav.energy_used += spent

    mob_rng = world.rng["mobility"]
    world.gus = [mobility.step_gu(gu, cfg, mob_rng) for gu in world.gus]

    samples = ch.draw_samples(world, cfg)
    served_ids = set()
    throughput = 0.0
    for gu, sample in zip(world.gus, samples):
        covered = ch.coverage_ok(gu.pos, new_cell, abs(sample.small_scale), cfg)
        if covered:
            uploaded = ch.rate(sample.coeff_mag, cfg) * cfg.hover_tau_c
            throughput += uploaded
            gu.buffer_bits = max(0.0, gu.buffer_bits + cfg.arrival_bits - uploaded)
            gu.served_count += 1
            served_ids.add(gu.id)
        else:
            gu.buffer_bits += cfg.arrival_bits

    fairness = jain_fairness([gu.served_count for gu in world.gus])
    utility = fairness * throughput

    within_budget = world.uav.energy_used <= cfg.energy_budget
    reward = utility if (served_ids and within_budget) else 0.0

    world.slot += 1
    world.prev_buffer_grid = g_before
    done_reason = None
    if not within_budget:
        done_reason = "energy_exhausted"
    elif world.slot >= cfg.max_steps_per_episode:
        done_reason = "max_steps"
    world.done = done_reason is not None
    world.done_reason = done_reason

    return StepOutcome(reward=reward, utility=utility, fairness=fairness,
                       served_ids=served_ids, throughput_bits=throughput,
                       energy_spent=spent, done=world.done,
                       done_reason=done_reason, samples=samples)


def discounted_return(rewards, gamma):
    """Sum of gamma^j * r_j."""
    return sum(r * gamma ** j for j, r in enumerate(rewards))
