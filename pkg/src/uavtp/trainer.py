"""Joint offline/online training loop.

During an episode the agent acts eta-greedily, pushes every transition into
the current-episode pool, keeps the small online memory rebuilt, and takes
online gradient steps. At the episode end the transitions join the
cross-episode pool, the large offline memory is rebuilt, and a burst of
offline updates runs. The target network is re-synced every fixed number of
updates.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import channel as ch
from . import environment as env
from . import qnet, replay
from .observation import build_observation
from .world import spawn_world


@dataclass
class TrainConfig:
    episodes: int = 10
    online_updates_per_slot: int = 1
    online_update_interval: int = 1     # slots between online update bursts
    offline_updates_per_episode: int = 200
    batch_size: int = 32
    target_sync_interval: int = 500     # updates between target syncs
    learning_rate: float = 1e-3
    offline_capacity: int = 50_000
    online_capacity: int = 2_000
    offline_pool_limit: int | None = None  # cap on retained past experiences
    reward_scale: float | None = None   # None: set from the first positive reward
    gu_growth: bool = False             # add one user per episode
    dtype: str = "float64"              # network precision; float32 for big runs

    def validate(self):
        for key in ("episodes", "online_updates_per_slot", "offline_updates_per_episode"):
            if getattr(self, key) < 0:
                raise ValueError(f"{key} must be >= 0")
        for key in ("online_update_interval", "batch_size", "target_sync_interval"):
            if getattr(self, key) < 1:
                raise ValueError(f"{key} must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


@dataclass
class EpisodeReport:
    episode: int
    total_reward: float
    steps: int
    final_fairness: float
    throughput_bits: float
    energy_used: float
    mean_td_loss: float
    n_gus: int = 0


def select_action(qvalues, eta, rng):
    """Argmax with probability eta (lowest index on ties), else one of the rest."""
    best = int(np.argmax(qvalues))
    if eta >= 1.0 or rng.random() < eta:
        return best
    other = int(rng.integers(env.N_ACTIONS - 1))
    return other if other < best else other + 1


def episode_seed(master_seed, ep_id):
    """Deterministic per-episode world seed derived from the master seed."""
    return int(np.random.SeedSequence([master_seed, ep_id]).generate_state(1)[0])


class Trainer:
    """Owns the networks, optimizer, memories, and the cross-episode pool."""

    def __init__(self, cfg, train_cfg):
        train_cfg.validate()
        self.cfg = cfg
        self.tc = train_cfg
        self.eval_params = qnet.init_params(cfg.grid_k, cfg.seed,
                                            dtype=np.dtype(train_cfg.dtype))
        self.target_params = qnet.sync_target(self.eval_params)
        self.optimizer = qnet.Adam(self.eval_params, lr=train_cfg.learning_rate)
        self.offline_memory = replay.ReplayMemory(train_cfg.offline_capacity, "offline_large")
        self.online_memory = replay.ReplayMemory(train_cfg.online_capacity, "online_small")
        self.offline_pool = []
        self.rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xB00C]))
        self.updates = 0
        self.seq = 0
        self.reward_scale = train_cfg.reward_scale
        self.world_factory = None  # optional hook: (ep_id, cfg, n_gus) -> WorldState

    # --- learning machinery -------------------------------------------------

    def _update_from(self, memory):
        batch = replay.sample(memory, self.tc.batch_size, self.rng)
        scale = self.reward_scale if self.reward_scale else 1.0
        batch["rewards"] = batch["rewards"] * scale
        loss, grads = qnet.td_loss(self.eval_params, self.target_params,
                                   batch, self.cfg.discount_gamma)
        if self.tc.learning_rate > 0:
            self.optimizer.apply_update(self.eval_params, grads)
        self.updates += 1
        if self.updates % self.tc.target_sync_interval == 0:
            self.target_params = qnet.sync_target(self.eval_params)
        return loss

    def _note_reward(self, reward):
        if self.reward_scale is None and reward > 0:
            self.reward_scale = 1.0 / reward

    def _limit_pool(self):
        limit = self.tc.offline_pool_limit
        if limit is None or len(self.offline_pool) <= limit:
            return
        # keep the best half by reward and the freshest remainder
        n_best = limit // 2
        ranked = sorted(self.offline_pool, key=lambda e: (-e.reward, -e.seq))
        best = ranked[:n_best]
        best_ids = {id(e) for e in best}
        fresh = [e for e in reversed(self.offline_pool) if id(e) not in best_ids]
        keep = best + fresh[:limit - n_best]
        keep.sort(key=lambda e: e.seq)
        self.offline_pool = keep

    # --- episode loops ------------------------------------------------------

    def run_episode(self, ep_id, n_gus=None, learn=True, record_trajectory=False):
        cfg = self.cfg
        if self.world_factory is not None:
            world = self.world_factory(ep_id, cfg, n_gus)
        else:
            world_cfg = dataclasses.replace(cfg, seed=episode_seed(cfg.seed, ep_id))
            world = spawn_world(world_cfg, n_gus)
        samples = ch.draw_samples(world, cfg)
        obs = build_observation(world, samples, cfg).tensor()

        episode_pool = []
        losses = []
        trajectory = [] if record_trajectory else None
        total_reward = 0.0
        throughput = 0.0
        fairness = 0.0
        steps = 0

        while not world.done:
            q = qnet.forward(self.eval_params, obs)
            eta = cfg.agent_eta if learn else 1.0
            action = select_action(q, eta, world.rng["agent"])
            out = env.step(world, action, cfg)
            next_obs = build_observation(world, out.samples, cfg).tensor()

            total_reward += out.reward
            throughput += out.throughput_bits
            fairness = out.fairness
            steps += 1
            if trajectory is not None:
                trajectory.append({
                    "t": world.slot - 1, "x_cell": world.uav.cell[0],
                    "y_cell": world.uav.cell[1], "action": int(action),
                    "reward": out.reward, "fairness": out.fairness,
                    "throughput_bits": out.throughput_bits,
                    "energy_used": world.uav.energy_used,
                    "n_served": len(out.served_ids),
                })

            if learn:
                self._note_reward(out.reward)
                exp = replay.Experience(obs.astype(np.float32), int(action),
                                        out.reward, next_obs.astype(np.float32),
                                        out.done, ep_id, self.seq)
                self.seq += 1
                episode_pool.append(exp)
                replay.rebuild(self.online_memory, episode_pool, self.rng)
                if steps % self.tc.online_update_interval == 0:
                    for _ in range(self.tc.online_updates_per_slot):
                        losses.append(self._update_from(self.online_memory))
            obs = next_obs

        if learn:
            self.offline_pool.extend(episode_pool)
            self._limit_pool()
            replay.rebuild(self.offline_memory, self.offline_pool, self.rng)
            for _ in range(self.tc.offline_updates_per_episode):
                losses.append(self._update_from(self.offline_memory))

        report = EpisodeReport(
            episode=ep_id, total_reward=total_reward, steps=steps,
            final_fairness=fairness, throughput_bits=throughput,
            energy_used=world.uav.energy_used,
            mean_td_loss=float(np.mean(losses)) if losses else 0.0,
            n_gus=len(world.gus))
        return (report, trajectory) if record_trajectory else report

    def train(self, progress=None):
        """Run the configured number of episodes; returns their reports."""
        reports = []
        for ep in range(self.tc.episodes):
            n_gus = self.cfg.n_gus + (ep if self.tc.gu_growth else 0)
            report = self.run_episode(ep, n_gus=n_gus)
            reports.append(report)
            if progress is not None:
                progress(report)
        return reports


def evaluate(params, cfg, ep_id=0, n_gus=None):
    """Pure greedy rollout with no learning; returns (report, trajectory)."""
    trainer = Trainer(cfg, TrainConfig(episodes=0))
    trainer.eval_params = params
    return trainer.run_episode(ep_id, n_gus=n_gus, learn=False,
                               record_trajectory=True)
