"""Synchronous actor-learner loop.

Each step: freeze the current params as the snapshot, let K actors play
``batch_size`` matches against it (in assignment order, whatever the
completion order), fold the returns into the role baselines, run the
proximal update, and append one metrics row. All randomness derives from
``(run seed, step, assignment index)`` so the batch is identical for any K
and a resumed run continues exactly.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import agents
from . import config as cfgmod
from . import policy as pol
from .advantage import BaselineTable
from .config import RunConfig
from .core import Game, Stream, make_game
from .errors import NonFiniteGradient, SelfPlayError, TrainingAborted
from .learner import OptimizerState, TrainStepReport, proximal_step
from .policy import PolicyParams
from .trajectory import OPPONENT_LOGPROB, Trajectory, TurnRecord, dumps_jsonl

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1
MAX_NONFINITE_STREAK = 3


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts]).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# Collection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Assignment:
    index: int
    game_slot: int
    match_seed: int
    policy_seed: int
    learner_role: int | None


def make_assignments(cfg: RunConfig, step: int, n: int | None = None, attempt: int = 0) -> list[Assignment]:
    weights = np.cumsum(cfg.game_weights())
    fixed = cfg.opponent.kind != "SelfPlayShared"
    out = []
    for i in range(cfg.run.batch_size if n is None else n):
        words = np.random.SeedSequence([cfg.run.seed & 0xFFFFFFFF, step, i, attempt]).generate_state(4, np.uint64)
        u = (int(words[0]) >> 11) * (1.0 / (1 << 53))
        slot = min(int(np.searchsorted(weights, u, side="right")), len(weights) - 1)
        match_seed = int(words[1])
        policy_seed = int(words[2])
        role = int(words[3] & 1) if fixed else None
        out.append(Assignment(i, slot, match_seed, policy_seed, role))
    return out


def play_trajectory(game: Game, match_seed: int, policy_seed: int, snapshot, temperature=1.0, mask="full",
                    opponent_kind="SelfPlayShared", learner_role=None, opponent_params=None,
                    opponent_script="", opponent_greedy=False, game_params=None) -> Trajectory:
    """Play one match. The learner acts for both roles under self-play."""
    state = game.reset(match_seed)
    stream = Stream(policy_seed)
    opp_stream = Stream(policy_seed ^ 0x5DEECE66D)
    turns = []
    n = game.n_actions
    while not state.terminal:
        role = state.turn % 2
        key = game.observe(state, role)
        legal = game.legal_actions(state)
        if opponent_kind == "SelfPlayShared" or role == learner_role:
            s = pol.sample(snapshot, key, n, temperature, legal if mask == "legal" else None, stream.uniform())
            a = s.action
            turns.append(TurnRecord(state.turn, role, key, a, s.logprob, a in legal, n, temperature,
                                    tuple(legal) if mask == "legal" else None, True))
        else:
            a = agents.opponent_action(opponent_kind, game, state, opp_stream, opponent_script,
                                       opponent_params, opponent_greedy, "legal")
            turns.append(TurnRecord(state.turn, role, key, a, OPPONENT_LOGPROB, a in legal, n, temperature,
                                    None, False))
        state = game.apply(state, a)
    ret = game.training_return(state)
    return Trajectory(game.name, match_seed, turns, (ret, -ret), state.outcome.reason.value, learner_role,
                      dict(game_params or {}), state.outcome.rho)


class Collector:
    """Owns the game objects of a config and runs batches with K actors."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.games = [make_game(g.name, **g.params) for g in cfg.games]

    def game_for(self, traj: Trajectory) -> Game:
        for g, entry in zip(self.games, self.cfg.games):
            if g.name == traj.game and entry.params == traj.game_params:
                return g
        return make_game(traj.game, **traj.game_params)

    def _play(self, a: Assignment, snapshot, opponent_params, step: int) -> Trajectory:
        cfg = self.cfg
        attempt = 0
        while True:
            game = self.games[a.game_slot]
            try:
                return play_trajectory(
                    game, a.match_seed, a.policy_seed, snapshot, cfg.policy.temperature, cfg.policy.mask,
                    cfg.opponent.kind, a.learner_role, opponent_params, cfg.opponent.script,
                    cfg.opponent.greedy, cfg.games[a.game_slot].params,
                )
            except SelfPlayError as exc:
                attempt += 1
                if attempt > cfg.run.max_retries:
                    raise TrainingAborted(f"assignment {a.index} failed {attempt} times: {exc}") from exc
                log.warning("assignment %d of step %d failed (%s); retrying", a.index, step, exc)
                a = make_assignments(cfg, step, a.index + 1, attempt)[a.index]

    def collect_batch(self, snapshot, step: int, opponent_params=None, actors: int | None = None) -> list[Trajectory]:
        assignments = make_assignments(self.cfg, step)
        k = max(1, actors or self.cfg.run.actors)
        if k == 1:
            return [self._play(a, snapshot, opponent_params, step) for a in assignments]
        chunks = [assignments[i::k] for i in range(k)]

        def work(chunk):
            return [(a.index, self._play(a, snapshot, opponent_params, step)) for a in chunk]

        with ThreadPoolExecutor(max_workers=k) as pool:
            done = [item for part in pool.map(work, chunks) for item in part]
        done.sort(key=lambda x: x[0])
        return [t for _, t in done]


def collect_batch(snapshot, cfg: RunConfig, step: int, opponent_params=None, actors=None) -> list[Trajectory]:
    return Collector(cfg).collect_batch(snapshot, step, opponent_params, actors)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


@dataclass
class TrainState:
    params: PolicyParams
    baselines: BaselineTable
    opt: OptimizerState
    step: int = 0
    nonfinite_streak: int = 0


def checkpoint_dict(state: TrainState, cfg: RunConfig, games=()) -> dict:
    return {
        "format": "selfplay-checkpoint",
        "version": CHECKPOINT_FORMAT,
        "step": state.step,
        "config_hash": cfg.digest(),
        "config": cfg.to_dict(),
        "policy": pol.policy_to_dict(state.params, games),
        "baselines": state.baselines.to_dict(),
        "optimizer": state.opt.to_dict(),
        "nonfinite_streak": state.nonfinite_streak,
    }


def dumps_checkpoint(state: TrainState, cfg: RunConfig, games=()) -> str:
    return json.dumps(checkpoint_dict(state, cfg, games), sort_keys=True, separators=(",", ":"))


def load_checkpoint(path) -> tuple[TrainState, dict]:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format") == "selfplay-policy":
        return TrainState(pol.policy_from_dict(data), BaselineTable(), OptimizerState(), 0), data
    if data.get("format") != "selfplay-checkpoint":
        raise SelfPlayError(f"{path}: not a checkpoint")
    if data.get("version") != CHECKPOINT_FORMAT:
        raise SelfPlayError(f"{path}: unsupported checkpoint version {data.get('version')}")
    st = TrainState(
        pol.policy_from_dict(data["policy"]),
        BaselineTable.from_dict(data["baselines"]),
        OptimizerState.from_dict(data["optimizer"]),
        int(data["step"]),
        int(data.get("nonfinite_streak", 0)),
    )
    return st, data


def load_policy(path) -> PolicyParams:
    return load_checkpoint(path)[0].params


def checkpoint_name(step: int) -> str:
    return f"step_{step:04d}.json"


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def metric_columns(cfg: RunConfig) -> list[str]:
    cols = [
        "step", "trajectories", "mean_return_p0", "role0_win_rate", "draw_rate",
        "invalid_move_frequency", "mean_game_length", "grad_norm", "clipped", "clip_fraction",
        "entropy", "snapshot",
    ]
    names = sorted({g.name for g in cfg.games})
    for name in names:
        for r in (0, 1):
            cols += [f"baseline_{name}_p{r}", f"mean_adv_{name}_p{r}"]
    if cfg.eval.every:
        for name in names:
            for opp in cfg.eval.opponents:
                tag = {"UniformRandomLegal": "random", "FrozenLag": "lag", "Scripted": "scripted"}[opp]
                cols += [f"eval_{name}_vs_{tag}_win_rate", f"eval_{name}_vs_{tag}_nonloss"]
            cols.append(f"eval_{name}_invalid_frequency")
    return cols


def batch_metrics(batch: list[Trajectory]) -> dict:
    n = len(batch)
    rho = np.array([t.outcome_rho for t in batch], dtype=float)
    ret = np.array([t.returns[0] for t in batch], dtype=float)
    learner_turns = [tr for t in batch for tr in t.turns if tr.learner]
    invalid = sum(1 for t in batch if t.reason == "InvalidMoveForfeit" and not t.turns[-1].legal and t.turns[-1].learner)
    return {
        "trajectories": n,
        "mean_return_p0": float(ret.mean()) if n else 0.0,
        "role0_win_rate": float((rho > 0).mean()) if n else 0.0,
        "draw_rate": float((rho == 0).mean()) if n else 0.0,
        "invalid_move_frequency": invalid / n if n else 0.0,
        "mean_game_length": float(np.mean([t.length for t in batch])) if n else 0.0,
        "learner_turns": len(learner_turns),
    }


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    state: TrainState
    rows: list = field(default_factory=list)
    run_dir: Path | None = None
    checkpoints: dict = field(default_factory=dict)


class Trainer:
    """Runs the training loop for one config, optionally persisting to ``run_dir``."""

    def __init__(self, cfg: RunConfig, run_dir=None, actors: int | None = None):
        self.cfg = cfg
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.actors = actors or cfg.run.actors
        self.collector = Collector(cfg)
        self.columns = metric_columns(cfg)
        self.checkpoints: dict[int, PolicyParams] = {}
        self.rows: list[dict] = []
        self._fixed_opponent = None
        if cfg.opponent.kind == "FrozenCheckpoint" and cfg.opponent.path:
            self._fixed_opponent = load_policy(cfg.opponent.path)

    # -- persistence ------------------------------------------------------

    def _ckpt_dir(self) -> Path:
        return self.run_dir / "checkpoints"

    def _prepare_dir(self):
        d = self.run_dir
        (d / "checkpoints").mkdir(parents=True, exist_ok=True)
        if self.cfg.run.log_trajectories_every:
            (d / "trajectories").mkdir(exist_ok=True)
        (d / "config.toml").write_text(cfgmod.dumps(self.cfg))

    def save_checkpoint(self, state: TrainState):
        self.checkpoints[state.step] = state.params
        if self.run_dir is None:
            return
        path = self._ckpt_dir() / checkpoint_name(state.step)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(dumps_checkpoint(state, self.cfg, self.collector.games))
        os.replace(tmp, path)

    def policy_at_or_before(self, step: int) -> PolicyParams:
        """Policy of the latest checkpoint whose step is <= ``step`` (clamped at 0)."""
        step = max(0, step)
        if self.run_dir is not None:
            for p in self._ckpt_dir().glob("step_*.json"):
                s = int(p.stem.split("_")[1])
                if s not in self.checkpoints and s <= step:
                    self.checkpoints[s] = load_policy(p)
        eligible = [s for s in self.checkpoints if s <= step]
        if not eligible:
            raise SelfPlayError(f"no checkpoint at or before step {step}")
        return self.checkpoints[max(eligible)]

    def latest_checkpoint(self):
        if self.run_dir is None or not self._ckpt_dir().exists():
            return None
        paths = sorted(self._ckpt_dir().glob("step_*.json"))
        return paths[-1] if paths else None

    def _write_rows(self, rows, append=True):
        if self.run_dir is None:
            return
        path = self.run_dir / "metrics.csv"
        new = not path.exists() or not append
        with open(path, "w" if not append else "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if new:
                w.writerow(self.columns)
            for r in rows:
                w.writerow([_fmt(r.get(c)) for c in self.columns])

    def _truncate_metrics(self, step: int):
        path = self.run_dir / "metrics.csv"
        if not path.exists():
            return
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        keep = [rows[0]] + [r for r in rows[1:] if r and int(r[0]) <= step]
        with open(path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(keep)

    # -- loop ---------------------------------------------------------------

    def initial_state(self) -> TrainState:
        return TrainState(PolicyParams(), BaselineTable(alpha=self.cfg.rae.alpha), OptimizerState(), 0)

    def resume_state(self) -> TrainState | None:
        path = self.latest_checkpoint()
        if path is None:
            return None
        st, data = load_checkpoint(path)
        if data["config_hash"] != self.cfg.digest():
            raise SelfPlayError(f"{path}: checkpoint belongs to a different config")
        self._truncate_metrics(st.step)
        return st

    def opponent_params(self, step: int):
        op = self.cfg.opponent
        if op.kind != "FrozenCheckpoint":
            return None
        if self._fixed_opponent is not None:
            return self._fixed_opponent
        return self.policy_at_or_before(step - op.lag_steps)

    def advantages(self, state: TrainState, batch):
        if not self.cfg.rae.enabled:
            return [(float(t.returns[0]), float(t.returns[1])) for t in batch]
        items = []
        for t in batch:
            items.append((t.game, 0, t.returns[0]))
            items.append((t.game, 1, t.returns[1]))
        recs = state.baselines.process_batch(items)
        return [(recs[2 * i].advantage, recs[2 * i + 1].advantage) for i in range(len(batch))]

    def step_once(self, state: TrainState) -> tuple[TrainState, dict, list]:
        cfg = self.cfg
        snap = state.params.snapshot()
        digest = snap.digest()
        batch = self.collector.collect_batch(snap, state.step, self.opponent_params(state.step), self.actors)
        if snap.digest() != digest:
            raise SelfPlayError("snapshot changed during collection")
        saved_baselines = state.baselines.copy()
        advs = self.advantages(state, batch)
        try:
            params, opt, report = proximal_step(state.params, batch, advs, state.opt, cfg.learner)
            streak = 0
        except NonFiniteGradient as exc:
            log.error("step %d: %s; parameters kept", state.step + 1, exc)
            params, opt, report = state.params, state.opt, TrainStepReport(gradient_norm_pre_clip=math.nan)
            state.baselines = saved_baselines
            streak = state.nonfinite_streak + 1
            if streak >= MAX_NONFINITE_STREAK:
                raise TrainingAborted(f"{streak} consecutive non-finite gradients")
        new = TrainState(params, state.baselines, opt, state.step + 1, streak)
        row = {"step": new.step, "snapshot": digest[:12]}
        row.update(batch_metrics(batch))
        row.update(
            grad_norm=report.gradient_norm_pre_clip,
            clipped=report.clipped,
            clip_fraction=report.clip_fraction,
            entropy=report.mean_entropy,
        )
        for name in sorted({g.name for g in cfg.games}):
            for r in (0, 1):
                row[f"baseline_{name}_p{r}"] = new.baselines.get(name, r)
                row[f"mean_adv_{name}_p{r}"] = report.mean_advantage.get((name, r))
        return new, row, batch

    def evaluate(self, state: TrainState) -> dict:
        from .evaluation import play_match

        cfg = self.cfg
        out = {}
        me = agents.PolicyAgent(state.params, greedy=cfg.eval.greedy, temperature=cfg.policy.temperature, mask="legal")
        seen = set()
        for gi, (game, entry) in enumerate(zip(self.collector.games, cfg.games)):
            if game.name in seen:
                continue
            seen.add(game.name)
            for oi, opp in enumerate(cfg.eval.opponents):
                seed = derive_seed(cfg.run.seed, state.step, gi, oi, 0xE7A1)
                if opp == "UniformRandomLegal":
                    other, tag = agents.RandomLegalAgent(), "random"
                elif opp == "Scripted":
                    other, tag = agents.ScriptedAgent(agents.default_script(game)), "scripted"
                else:
                    lagged = self.policy_at_or_before(state.step - cfg.eval.lag_steps)
                    other, tag = agents.PolicyAgent(lagged, greedy=False, temperature=cfg.policy.temperature), "lag"
                    # both sides sample so the mirror match is symmetric
                    mine = agents.PolicyAgent(state.params, greedy=False, temperature=cfg.policy.temperature)
                    rep = play_match(mine, other, game, cfg.eval.games, seed)
                    out[f"eval_{game.name}_vs_{tag}_win_rate"] = rep.win_rate
                    out[f"eval_{game.name}_vs_{tag}_nonloss"] = rep.nonloss_rate
                    continue
                rep = play_match(me, other, game, cfg.eval.games, seed)
                out[f"eval_{game.name}_vs_{tag}_win_rate"] = rep.win_rate
                out[f"eval_{game.name}_vs_{tag}_nonloss"] = rep.nonloss_rate
            sampler = agents.PolicyAgent(state.params, greedy=False, temperature=cfg.policy.temperature,
                                         mask=cfg.policy.mask)
            rep = play_match(sampler, agents.RandomLegalAgent(), game, cfg.eval.games,
                             derive_seed(cfg.run.seed, state.step, gi, 0x1A7))
            out[f"eval_{game.name}_invalid_frequency"] = rep.invalid_frequency[0]
        return out

    def run(self, resume: bool = False, stop_at: int | None = None, state: TrainState | None = None) -> TrainResult:
        """Train until ``total_steps`` (or ``stop_at``) updates have been applied."""
        cfg = self.cfg
        if self.run_dir is not None:
            self._prepare_dir()
        st = None
        if resume:
            st = self.resume_state()
        if st is None:
            st = state or self.initial_state()
            if self.run_dir is not None and (self.run_dir / "metrics.csv").exists():
                (self.run_dir / "metrics.csv").unlink()
            self.save_checkpoint(st)
            self._write_rows([], append=False)
        else:
            self.checkpoints[st.step] = st.params
        end = cfg.run.total_steps if stop_at is None else min(stop_at, cfg.run.total_steps)
        timing = []
        while st.step < end:
            t0 = time.perf_counter()
            st, row, batch = self.step_once(st)
            if cfg.eval.every and st.step % cfg.eval.every == 0:
                row.update(self.evaluate(st))
            if st.step % cfg.run.checkpoint_every == 0 or st.step == cfg.run.total_steps:
                self.save_checkpoint(st)
            if self.run_dir is not None and cfg.run.log_trajectories_every and st.step % cfg.run.log_trajectories_every == 0:
                path = self.run_dir / "trajectories" / f"step_{st.step:04d}.jsonl"
                path.write_text(dumps_jsonl(batch, self.collector.game_for))
            self.rows.append(row)
            self._write_rows([row])
            timing.append((st.step, time.perf_counter() - t0))
            log.info("step %d grad_norm=%.4g entropy=%.4g", st.step, row["grad_norm"], row["entropy"])
        if st.step not in self.checkpoints:
            self.save_checkpoint(st)  # an early stop must be resumable from exactly here
        if self.run_dir is not None and timing:
            path = self.run_dir / "timing.csv"
            new = not path.exists()
            with open(path, "a", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                if new:
                    w.writerow(["step", "wall_clock_seconds"])
                w.writerows(timing)
        return TrainResult(st, self.rows, self.run_dir, self.checkpoints)


def train(cfg: RunConfig, run_dir=None, resume=False, stop_at=None, actors=None) -> TrainResult:
    return Trainer(cfg, run_dir, actors).run(resume=resume, stop_at=stop_at)


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()
