"""World state container, grid/continuous coordinate mapping, seeded RNG streams.

Coordinate convention used everywhere: the first component is x (east, grid
column), the second is y (north, grid row). A cell (cx, cy) covers
[cx*cell_size, (cx+1)*cell_size) x [cy*cell_size, (cy+1)*cell_size).
"""

import math
from dataclasses import dataclass, field

import numpy as np

#: Names of the independent random streams, in spawn order.
STREAM_NAMES = ("mobility", "channel", "trend", "agent")

#: Admissible ground-user headings (4-directional model), radians.
HEADINGS = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)


@dataclass
class GroundUser:
    id: int
    pos: np.ndarray          # (x, y) meters
    speed: float             # m/s
    heading: float           # radians
    buffer_bits: float = 0.0
    served_count: int = 0

    def copy(self):
        return GroundUser(self.id, self.pos.copy(), self.speed, self.heading,
                          self.buffer_bits, self.served_count)


@dataclass
class UavState:
    cell: tuple              # (cx, cy) grid waypoint
    energy_used: float = 0.0

    def copy(self):
        return UavState(self.cell, self.energy_used)


@dataclass
class WorldState:
    slot: int
    uav: UavState
    gus: list
    prev_buffer_grid: np.ndarray      # K x K, buffer map at the end of the previous slot
    rng: dict = field(repr=False, default_factory=dict)
    done: bool = False
    done_reason: str | None = None


def make_streams(seed):
    """Four independent generators split deterministically from one master seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(ss)
            for name, ss in zip(STREAM_NAMES, children)}


def cell_center(cell, cfg):
    """Continuous (x, y) of a cell's center; the UAV waypoint for that cell."""
    cx, cy = cell
    k = cfg.grid_k
    if not (0 <= cx < k and 0 <= cy < k):
        raise ValueError(f"cell {cell} outside the {k}x{k} grid")
    return ((cx + 0.5) * cfg.cell_size, (cy + 0.5) * cfg.cell_size)


def pos_to_cell(pos, cfg):
    """Cell containing a continuous position; the AoI max edge maps to the last cell."""
    k = cfg.grid_k
    cx = min(max(int(math.floor(pos[0] / cfg.cell_size)), 0), k - 1)
    cy = min(max(int(math.floor(pos[1] / cfg.cell_size)), 0), k - 1)
    return (cx, cy)


def spawn_world(cfg, n_gus=None):
    """Fresh world: users uniform over the AoI, empty buffers, UAV at grid center.

    Identical seeds reproduce identical worlds bit for bit.
    """
    if n_gus is None:
        n_gus = cfg.n_gus
    if n_gus <= 0:
        raise ValueError(f"n_gus must be >= 1, got {n_gus}")
    rng = make_streams(cfg.seed)
    mob = rng["mobility"]
    size = cfg.aoi_size
    gus = []
    for i in range(n_gus):
        pos = mob.uniform(0.0, size, size=2)
        heading = HEADINGS[mob.integers(4)]
        gus.append(GroundUser(id=i, pos=pos, speed=cfg.gu_mean_speed,
                              heading=heading))
    center = (cfg.grid_k // 2, cfg.grid_k // 2)
    k = cfg.grid_k
    return WorldState(slot=0, uav=UavState(cell=center), gus=gus,
                      prev_buffer_grid=np.zeros((k, k)), rng=rng)
