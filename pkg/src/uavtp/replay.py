"""Reward-biased replay memories.

Two kinds: a large cross-episode store (70% top-reward / 30% random of its
candidate pool) and a small current-episode store (80% / 20%). The bias is
applied when the memory is rebuilt from its pool; sampling afterwards is
uniform with replacement.
"""

import math
from dataclasses import dataclass, field

import numpy as np

QUOTAS = {"offline_large": 0.70, "online_small": 0.80}


@dataclass
class Experience:
    obs: np.ndarray           # 3 x K x K, stored float32
    action: int
    reward: float
    next_obs: np.ndarray
    terminal: bool
    episode_id: int
    seq: int = 0              # global insertion counter, used for recency ties


@dataclass
class ReplayMemory:
    capacity: int
    kind: str                 # "offline_large" or "online_small"
    items: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in QUOTAS:
            raise ValueError(f"unknown memory kind {self.kind!r}")
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")

    def __len__(self):
        return len(self.items)


def rebuild(memory, pool, rng):
    """Refill the memory from a candidate pool under the kind's reward bias.

    Takes the top ceil(q*capacity) experiences by reward (newer first on
    ties) plus floor((1-q)*capacity) uniform draws without replacement from
    the remainder. Pools smaller than the capacity are taken whole.
    """
    if not pool:
        raise ValueError("cannot rebuild a replay memory from an empty pool")
    cap = memory.capacity
    if len(pool) <= cap:
        memory.items = list(pool)
        return memory
    q_top = QUOTAS[memory.kind]
    n_top = math.ceil(q_top * cap)
    n_rand = cap - n_top
    ranked = sorted(pool, key=lambda e: (-e.reward, -e.seq))
    top = ranked[:n_top]
    rest = ranked[n_top:]
    picks = rng.choice(len(rest), size=n_rand, replace=False) if n_rand else []
    memory.items = top + [rest[i] for i in sorted(picks)]
    return memory


def sample(memory, batch_size, rng):
    """Uniform-with-replacement batch, packed for the TD loss."""
    if batch_size <= 0:
        raise ValueError("batch size must be positive")
    if not memory.items:
        raise ValueError("cannot sample from an empty memory")
    idx = rng.integers(0, len(memory.items), size=batch_size)
    chosen = [memory.items[i] for i in idx]
    return {
        "observations": np.stack([e.obs for e in chosen]).astype(np.float64),
        "actions": np.array([e.action for e in chosen], dtype=np.intp),
        "rewards": np.array([e.reward for e in chosen]),
        "next_observations": np.stack([e.next_obs for e in chosen]).astype(np.float64),
        "terminal": np.array([e.terminal for e in chosen], dtype=bool),
    }
