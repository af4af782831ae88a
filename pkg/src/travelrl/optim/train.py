"""GRPO training of the ToyPolicy on the mini-task."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .. import seeding
from ..reward import RewardScheme
from ..rollout.runner import RolloutGroup, rollout, rollout_group
from ..sandbox.tools import FailureConfig
from .arpo import ArpoConfig, arpo_rollout_group
from .grpo import ClipConfig, GroupBatch, dapo_filter, surrogate_objective
from .toy import MiniTask, ToyPolicy, make_minitask


class DivergenceError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    seed: int = 0
    scheme: str = "Sum"
    epochs: int = 5
    updates_per_epoch: int = 60
    batch_size: int = 32
    G: int = 8
    lr: float = 50.0
    temperature: float = 1.0
    eps_low: float = 0.2
    eps_high: float = 0.28
    ppo_epochs: int = 1
    dapo: bool = False
    arpo: dict[str, Any] | None = None
    failure_p: float = 0.0
    use_tools: bool = False
    eval_every: int = 10
    n_train: int = 300
    n_val: int = 100

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.updates_per_epoch < 1 or self.batch_size < 1:
            raise ValueError("epochs, updates_per_epoch and batch_size must be positive")
        if self.G < 2:
            raise ValueError("training needs G >= 2")
        if self.lr < 0 or not math.isfinite(self.lr):
            raise ValueError("lr must be a finite nonnegative number")
        if self.ppo_epochs < 1 or self.eval_every < 1:
            raise ValueError("ppo_epochs and eval_every must be positive")
        # constructing these validates them
        _ = (self.clip, self.reward_scheme, FailureConfig(self.failure_p), self.arpo_config)

    @property
    def clip(self) -> ClipConfig:
        return ClipConfig(self.eps_low, self.eps_high)

    @property
    def reward_scheme(self) -> RewardScheme:
        if self.scheme == "Curriculum":
            return RewardScheme.curriculum(self.epochs)
        return RewardScheme(self.scheme)

    @property
    def arpo_config(self) -> ArpoConfig | None:
        return None if self.arpo is None else ArpoConfig(**self.arpo)

    @property
    def total_updates(self) -> int:
        return self.epochs * self.updates_per_epoch

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ValueError(f"unknown training config keys: {', '.join(unknown)}")
        return cls(**obj)


@dataclass
class TrainResult:
    config: TrainConfig
    curve: list[dict[str, Any]]
    evals: list[dict[str, Any]]
    switches: list[dict[str, Any]]
    baseline_success: float
    best_success: float
    best_update: int
    best_state: dict[str, Any]
    final_state: dict[str, Any]
    seconds: float
    skipped_updates: int = 0
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict[str, Any]:
        return {
            "scheme": self.config.scheme,
            "baseline_success": self.baseline_success,
            "best_success": self.best_success,
            "best_update": self.best_update,
            "final_success": self.evals[-1]["val_success"] if self.evals else None,
            "updates": self.config.total_updates,
            "skipped_updates": self.skipped_updates,
            "switches": self.switches,
            "seconds": round(self.seconds, 2),
        }


def validation_success(policy: ToyPolicy, task: MiniTask, seed: int, failure: FailureConfig | None = None) -> float:
    """Success rate of sampled rollouts on the validation pool, with fixed streams."""
    wins = 0
    for i, it in enumerate(task.val):
        prng = seeding.stream(seed, seeding.EVAL, i, seeding.POLICY)
        frng = seeding.stream(seed, seeding.EVAL, i, seeding.FAILURE)
        res = rollout(policy, it.spec, task.db, query=it.text, rng=prng, failure_rng=frng, failure=failure)
        wins += res.scores.success
    return wins / len(task.val)


def collect_groups(
    policy: ToyPolicy,
    task: MiniTask,
    cfg: TrainConfig,
    update: int,
    epoch: int,
    scheme: RewardScheme,
) -> list[RolloutGroup]:
    brng = seeding.stream(cfg.seed, seeding.BATCH, update)
    n = len(task.train)
    picks = brng.choice(n, size=min(cfg.batch_size, n), replace=False)
    useed = int(brng.integers(2**62))
    failure = FailureConfig(cfg.failure_p)
    arpo = cfg.arpo_config
    groups = []
    for j in picks:
        it = task.train[int(j)]
        kw = dict(seed=useed, query=it.text, scheme=scheme, epoch=epoch, failure=failure)
        if arpo is None:
            groups.append(rollout_group(policy, it.spec, task.db, cfg.G, **kw))
        else:
            groups.append(arpo_rollout_group(policy, it.spec, task.db, cfg.G, arpo, **kw))
    return groups


def train_toy(
    cfg: TrainConfig,
    task: MiniTask | None = None,
    on_record: Callable[[dict[str, Any]], None] | None = None,
) -> TrainResult:
    """Plain gradient ascent on the clipped surrogate, with checkpoint selection on validation."""
    t0 = time.perf_counter()
    task = task or make_minitask(cfg.seed, cfg.n_train, cfg.n_val)
    policy = ToyPolicy(task.db, cfg.temperature, cfg.use_tools)
    scheme = cfg.reward_scheme
    clip = cfg.clip
    # validation runs in a clean environment
    baseline = validation_success(policy, task, cfg.seed)
    evals = [{"update": 0, "epoch": 0, "val_success": baseline}]
    best, best_update, best_state = baseline, 0, policy.get_state()
    curve: list[dict[str, Any]] = []
    switches: list[dict[str, Any]] = []
    skipped = 0
    active = None
    update = 0
    for epoch in range(cfg.epochs):
        kind = scheme.active(epoch)
        if kind != active:
            switches.append({"epoch": epoch, "update": update, "kind": kind})
            active = kind
        for _ in range(cfg.updates_per_epoch):
            groups = collect_groups(policy, task, cfg, update, epoch, scheme)
            # infrastructure failures never enter a training batch
            groups = [g for g in groups if all(t.termination != "infrastructure_error" for t in g.trajectories)]
            batch = GroupBatch.from_groups(groups)
            mean_reward = float(np.mean(np.concatenate(batch.rewards))) if groups else 0.0
            if cfg.dapo:
                batch = dapo_filter(batch)
            rec: dict[str, Any] = {
                "update": update + 1,
                "epoch": epoch,
                "kind": kind,
                "reward_mean": mean_reward,
                "success_mean": float(np.mean([s.success for g in groups for s in g.scores])) if groups else 0.0,
                "groups": len(batch),
                "trajectories": sum(len(m) for m in batch.members),
            }
            if batch.empty:
                skipped += 1
                rec["objective"] = None
            else:
                adv = batch.advantages()
                for _ in range(cfg.ppo_epochs):
                    res = surrogate_objective(batch, adv, clip, policy)
                    if not math.isfinite(res.objective) or not np.all(np.isfinite(res.grad)):
                        raise DivergenceError(
                            f"non-finite objective at update {update + 1} (epoch {epoch}): "
                            f"objective={res.objective}, max|theta|={float(np.max(np.abs(policy.theta)))}"
                        )
                    policy.theta = policy.theta + cfg.lr * res.grad
                rec["objective"] = res.objective
                rec["clip_fraction"] = float(np.mean(res.clipped)) if res.clipped else 0.0
            update += 1
            if update % cfg.eval_every == 0 or update == cfg.total_updates:
                v = validation_success(policy, task, cfg.seed)
                rec["val_success"] = v
                evals.append({"update": update, "epoch": epoch, "val_success": v})
                if v > best:
                    best, best_update, best_state = v, update, policy.get_state()
            curve.append(rec)
            if on_record is not None:
                on_record(rec)
    return TrainResult(cfg, curve, evals, switches, baseline, best, best_update, best_state,
                       policy.get_state(), time.perf_counter() - t0, skipped)


def write_curve(result: TrainResult, path: str | Path) -> Path:
    """One JSON record per update, then nothing else; easy to plot."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as fh:
        for rec in result.curve:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return p


def save_checkpoint(state: dict[str, Any], path: str | Path, meta: dict[str, Any] | None = None) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps({"policy": state, "meta": meta or {}}, sort_keys=True))
    return p


def load_checkpoint(path: str | Path, policy: ToyPolicy) -> dict[str, Any]:
    obj = json.loads(Path(path).read_text())
    policy.set_state(obj["policy"])
    return obj.get("meta", {})
