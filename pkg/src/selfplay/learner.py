"""Policy-gradient learner.

The batch gradient is the role-summed REINFORCE estimator

    g = (1/B) * sum_traj sum_turns A(traj, role) * dlogpi(turn)

Turn terms are summed within a trajectory (no division by its length) and
averaged over the B trajectories. ``proximal_step`` re-evaluates that sum
for several inner epochs with clipped probability ratios against the
collection-time log-probabilities, clips the global norm, then takes one
optimizer step per epoch. Parameters move by gradient ascent.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import LearnerConfig
from .errors import MissingAdvantage, NonFiniteGradient, SnapshotMismatch
from .policy import PolicyParams, make_mask

log = logging.getLogger(__name__)

LOGPROB_TOLERANCE = 1e-9


class GradientAccumulator:
    """Sparse map observation key -> gradient row."""

    def __init__(self, rows=None):
        self.rows: dict[str, np.ndarray] = dict(rows or {})

    def add(self, key: str, vec: np.ndarray) -> None:
        row = self.rows.get(key)
        if row is None:
            self.rows[key] = np.array(vec, dtype=np.float64)
        else:
            row += vec

    def scale(self, c: float) -> None:
        for row in self.rows.values():
            row *= c

    @property
    def global_norm(self) -> float:
        return math.sqrt(sum(float(np.dot(r, r)) for r in self.rows.values()))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(r)) for r in self.rows.values())

    def nonzero_rows(self) -> dict:
        return {k: r for k, r in self.rows.items() if np.any(r != 0.0)}

    def get(self, key: str, n: int) -> np.ndarray:
        r = self.rows.get(key)
        return np.zeros(n) if r is None else r


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "m": {k: [float(x) for x in self.m[k]] for k in sorted(self.m)},
            "v": {k: [float(x) for x in self.v[k]] for k in sorted(self.v)},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizerState":
        return cls(
            {k: np.array(x, dtype=np.float64) for k, x in data["m"].items()},
            {k: np.array(x, dtype=np.float64) for k, x in data["v"].items()},
            int(data["step"]),
        )


@dataclass
class TrainStepReport:
    gradient_norm_pre_clip: float = 0.0
    clipped: bool = False
    mean_entropy: float = 0.0
    mean_advantage: dict = field(default_factory=dict)
    clip_fraction: float = 0.0
    epoch_gradient_norms: list = field(default_factory=list)


def _advantage_pairs(trajectories, advantages):
    if advantages is None or len(advantages) != len(trajectories):
        raise MissingAdvantage("one advantage pair per trajectory is required")
    return advantages


def _batch_gradient(params, trajectories, advantages, clip_eps=math.inf, check_logprob=False):
    """Clipped-surrogate gradient of the batch; returns (accumulator, clip fraction, mean entropy).

    Turns sharing an (observation key, mask, temperature) group share one
    softmax; per-action coefficients are summed and expanded once per group.
    """
    advantages = _advantage_pairs(trajectories, advantages)
    groups: dict = {}
    n_turns = 0
    n_clipped = 0
    entropy_sum = 0.0
    for traj, adv in zip(trajectories, advantages):
        for turn in traj.turns:
            if not turn.learner:
                continue
            a_val = adv[turn.role]
            if a_val is None or not math.isfinite(a_val):
                raise MissingAdvantage(f"missing advantage for role {turn.role} in trajectory seed {traj.seed}")
            gkey = (turn.obs_key, turn.mask, turn.temperature, turn.n_actions)
            g = groups.get(gkey)
            if g is None:
                mask = make_mask(turn.n_actions, turn.mask)
                probs = kernels.masked_softmax(params.logits(turn.obs_key, turn.n_actions), mask, float(turn.temperature))
                g = groups[gkey] = [probs, np.zeros(turn.n_actions), 0.0, kernels.entropy(probs)]
            probs = g[0]
            logp = math.log(probs[turn.action]) if probs[turn.action] > 0 else -math.inf
            if check_logprob and abs(logp - turn.logprob) > LOGPROB_TOLERANCE:
                raise SnapshotMismatch(
                    f"turn {turn.t} of seed {traj.seed}: logprob {turn.logprob} vs snapshot {logp}"
                )
            ratio = math.exp(logp - turn.logprob)
            n_turns += 1
            entropy_sum += g[3]
            if abs(ratio - 1.0) > clip_eps:
                n_clipped += 1
            if (a_val > 0 and ratio > 1.0 + clip_eps) or (a_val < 0 and ratio < 1.0 - clip_eps):
                continue
            coef = a_val * ratio
            g[1][turn.action] += coef
            g[2] += coef
    acc = GradientAccumulator()
    inv_b = 1.0 / len(trajectories)
    for (key, _mask, temp, _n), (probs, onehot, total, _h) in groups.items():
        acc.add(key, (onehot - total * probs) * (inv_b / temp))
    clip_frac = n_clipped / n_turns if n_turns else 0.0
    mean_h = entropy_sum / n_turns if n_turns else 0.0
    return acc, clip_frac, mean_h


def accumulate_reinforce(trajectories, advantages, snapshot: PolicyParams, check_logprob=True) -> GradientAccumulator:
    """Batch-averaged REINFORCE gradient under ``snapshot``."""
    acc, _, _ = _batch_gradient(snapshot, trajectories, advantages, math.inf, check_logprob)
    return acc


def surrogate_objective(params, trajectories, advantages, clip_eps=math.inf) -> float:
    """(1/B) * sum of min(r * A, clip(r) * A) over learner turns; its gradient is ``_batch_gradient``."""
    total = 0.0
    for traj, adv in zip(trajectories, _advantage_pairs(trajectories, advantages)):
        for turn in traj.turns:
            if not turn.learner:
                continue
            probs = kernels.masked_softmax(
                params.logits(turn.obs_key, turn.n_actions), make_mask(turn.n_actions, turn.mask), float(turn.temperature)
            )
            r = math.exp(math.log(probs[turn.action]) - turn.logprob)
            a = adv[turn.role]
            total += min(r * a, min(max(r, 1.0 - clip_eps), 1.0 + clip_eps) * a)
    return total / len(trajectories)


def clip_global_norm(acc: GradientAccumulator, max_norm: float) -> tuple[float, bool]:
    norm = acc.global_norm
    if norm > max_norm:
        acc.scale(max_norm / norm)
        return norm, True
    return norm, False


def apply_gradient(params: PolicyParams, opt: OptimizerState, acc: GradientAccumulator, cfg: LearnerConfig):
    """One ascent step on the rows the gradient touches. Returns new (params, optimizer state)."""
    rows = acc.nonzero_rows()
    if not rows:
        return params, opt
    updates = {}
    if cfg.optimizer == "sgd":
        for key, g in rows.items():
            updates[key] = params.logits(key, g.shape[0]) + cfg.learning_rate * g
        return params.with_rows(updates), OptimizerState(opt.m, opt.v, opt.step + 1)
    step = opt.step + 1
    m = dict(opt.m)
    v = dict(opt.v)
    for key, g in rows.items():
        theta = np.array(params.logits(key, g.shape[0]), dtype=np.float64)
        mk = np.array(m[key]) if key in m else np.zeros_like(g)
        vk = np.array(v[key]) if key in v else np.zeros_like(g)
        kernels.adam_update(theta, g, mk, vk, step, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay)
        updates[key] = theta
        m[key] = mk
        v[key] = vk
    return params.with_rows(updates), OptimizerState(m, v, step)


def proximal_step(params: PolicyParams, trajectories, advantages, opt: OptimizerState, cfg: LearnerConfig, check_logprob=True):
    """Inner proximal epochs over one batch. Returns (params, optimizer state, report).

    Raises NonFiniteGradient before committing anything; the caller keeps
    its previous params and optimizer state.
    """
    report = TrainStepReport()
    clip_fracs = []
    cur_params, cur_opt = params, opt
    for epoch in range(cfg.inner_epochs):
        acc, clip_frac, mean_h = _batch_gradient(
            cur_params, trajectories, advantages, cfg.clip_eps, check_logprob and epoch == 0
        )
        if not acc.is_finite():
            raise NonFiniteGradient(f"non-finite gradient in inner epoch {epoch}")
        if epoch == 0:
            report.mean_entropy = mean_h
        norm, clipped = clip_global_norm(acc, cfg.max_grad_norm)
        if epoch == 0:
            report.gradient_norm_pre_clip = norm
        report.epoch_gradient_norms.append(norm)
        report.clipped = report.clipped or clipped
        clip_fracs.append(clip_frac)
        cur_params, cur_opt = apply_gradient(cur_params, cur_opt, acc, cfg)
    report.clip_fraction = float(np.mean(clip_fracs)) if clip_fracs else 0.0
    sums: dict = {}
    for traj, adv in zip(trajectories, advantages):
        for role in (0, 1):
            s = sums.setdefault((traj.game, role), [0.0, 0])
            s[0] += adv[role]
            s[1] += 1
    report.mean_advantage = {k: v[0] / v[1] for k, v in sums.items()}
    return cur_params, cur_opt, report
