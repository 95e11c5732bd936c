"""Command-line entry point: ``selfplay <subcommand> ...``.

Exit codes: 0 success, 1 validation error, 2 aborted training,
3 replay divergence. ``SELFPLAY_RUNS`` sets the default output root.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import agents, config as cfgmod, oracles
from .core import make_game
from .errors import ConfigError, ReplayDivergence, SelfPlayError, TrainingAborted
from .evaluation import play_match
from .policy import action_distribution, export_text
from .runtime import Trainer, load_checkpoint, load_policy

EXIT_OK, EXIT_INVALID, EXIT_ABORTED, EXIT_DIVERGED = 0, 1, 2, 3

RQ2_ARMS = {
    "selfplay": ["opponent.kind=\"SelfPlayShared\""],
    "random": ["opponent.kind=\"UniformRandomLegal\""],
    "scripted": ["opponent.kind=\"Scripted\""],
    "frozen": ["opponent.kind=\"FrozenCheckpoint\""],
}
RQ4_ARMS = {
    "rae_on": ["rae.enabled=true"],
    "rae_off": ["rae.enabled=false"],
}
RQ4_STEPS = 200

log = logging.getLogger("selfplay")
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def default_root() -> Path:
    return Path(os.environ.get("SELFPLAY_RUNS", "runs"))


def _resolve(args, extra=()) -> cfgmod.RunConfig:
    overrides = list(args.override or ()) + list(extra)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    return cfgmod.resolve(args.config, overrides)


def _out_dir(args, cfg, tag: str) -> Path:
    if args.out:
        return Path(args.out)
    return default_root() / f"{tag}-{cfg.digest()}"


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _emit(args, data) -> None:
    if not args.quiet:
        print(json.dumps(data, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args, cfg, "train")
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    log.addHandler(handler)
    try:
        res = Trainer(cfg, out, args.actors).run(resume=args.resume, stop_at=args.stop_at)
    finally:
        log.removeHandler(handler)
        handler.close()
    _emit(args, {"run_dir": str(out), "step": res.state.step, "policy_digest": res.state.params.digest()})
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def _opponent(spec: str, game):
    if spec == "random":
        return agents.RandomLegalAgent()
    if spec == "scripted":
        return agents.ScriptedAgent(agents.default_script(game))
    if spec.startswith("script:"):
        return agents.ScriptedAgent(spec.split(":", 1)[1])
    return agents.PolicyAgent(load_policy(spec), greedy=False, name=Path(spec).stem)


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.toml").write_text(cfgmod.dumps(cfg))
    params = load_policy(args.checkpoint)
    reports = []
    seen = set()
    for entry in cfg.games:
        if entry.name in seen:
            continue
        seen.add(entry.name)
        game = make_game(entry.name, **entry.params)
        me = agents.PolicyAgent(params, greedy=not args.sample, temperature=cfg.policy.temperature,
                                name=Path(args.checkpoint).stem)
        for spec in args.opponent:
            rep = play_match(me, _opponent(spec, game), game, args.games, cfg.run.seed)
            reports.append(rep.to_dict())
    if out is not None:
        _write_json(out / "eval.json", reports)
    _emit(args, reports)
    return EXIT_OK


# ---------------------------------------------------------------------------
# exploitability


def cmd_exploitability(args) -> int:
    if args.checkpoint == "uniform":
        rep = oracles.kuhn_exploitability(oracles.uniform_kuhn_strategy, "uniform")
    elif args.checkpoint == "nash":
        rep = oracles.kuhn_exploitability(oracles.kuhn_nash_strategy(), "nash")
    else:
        rep = oracles.kuhn_exploitability(load_policy(args.checkpoint), Path(args.checkpoint).stem)
    data = rep.to_dict()
    if args.out:
        _write_json(Path(args.out), data)
    _emit(args, data)
    return EXIT_OK


# ---------------------------------------------------------------------------
# ablate


def _arm_columns(rows, suite):
    if suite == "rq4":
        keep = ("grad_norm", "entropy", "clipped", "mean_return_p0", "invalid_move_frequency")
        return [c for c in keep if any(c in r for r in rows)]
    cols = ["grad_norm", "entropy", "mean_return_p0", "invalid_move_frequency", "mean_game_length"]
    extra = sorted({c for r in rows for c in r if c.startswith("eval_")})
    return cols + extra


def coefficient_of_variation(xs) -> float:
    xs = np.asarray([x for x in xs if x is not None and math.isfinite(x)], dtype=float)
    if xs.size < 2 or xs.mean() == 0:
        return math.nan
    return float(xs.std(ddof=1) / xs.mean())


def run_ablation(suite: str, base_cfg_args, seeds, out: Path, quiet=True) -> dict:
    """Run every arm of ``suite`` for each seed; write side-by-side CSVs and a summary.

    ``base_cfg_args`` is ``(config path, overrides)``. Arms differ only by
    their own overrides, so every arm sees the same step seeds.
    """
    path, overrides = base_cfg_args
    arms = RQ2_ARMS if suite == "rq2" else RQ4_ARMS
    out.mkdir(parents=True, exist_ok=True)
    summary = {"suite": suite, "seeds": list(seeds), "arms": {}}
    for seed in seeds:
        arm_rows = {}
        for arm, arm_over in arms.items():
            extra = list(arm_over) + [f"run.seed={seed}"]
            if suite == "rq4":
                extra.append(f"run.total_steps={RQ4_STEPS}")
            cfg = cfgmod.resolve(path, list(overrides) + extra)
            res = Trainer(cfg, out / f"seed{seed}" / arm).run()
            arm_rows[arm] = res.rows
            norms = [r["grad_norm"] for r in res.rows if r["step"] <= RQ4_STEPS]
            s = summary["arms"].setdefault(arm, {"grad_norm_cv": {}, "mean_entropy": {}})
            s["grad_norm_cv"][str(seed)] = coefficient_of_variation(norms)
            s["mean_entropy"][str(seed)] = float(np.mean([r["entropy"] for r in res.rows])) if res.rows else math.nan
            if not quiet:
                print(f"{suite} seed={seed} arm={arm} cv={s['grad_norm_cv'][str(seed)]:.4f}", file=sys.stderr)
        _write_side_by_side(out / f"ablate_{suite}_seed{seed}.csv", arm_rows, suite)
    for arm, s in summary["arms"].items():
        s["grad_norm_cv_mean"] = float(np.nanmean(list(s["grad_norm_cv"].values())))
    if suite == "rq4":
        on = summary["arms"]["rae_on"]["grad_norm_cv"]
        off = summary["arms"]["rae_off"]["grad_norm_cv"]
        summary["rae_off_higher_cv_seeds"] = sum(off[k] > on[k] for k in on)
        summary["rae_off_higher_cv"] = (
            summary["arms"]["rae_off"]["grad_norm_cv_mean"] > summary["arms"]["rae_on"]["grad_norm_cv_mean"]
        )
    _write_json(out / f"ablate_{suite}_summary.json", summary)
    return summary


def _write_side_by_side(path: Path, arm_rows: dict, suite: str) -> None:
    cols = {arm: _arm_columns(rows, suite) for arm, rows in arm_rows.items()}
    by_step: dict = {}
    for arm, rows in arm_rows.items():
        for r in rows:
            by_step.setdefault(r["step"], {})[arm] = r
    header = ["step"] + [f"{arm}:{c}" for arm in arm_rows for c in cols[arm]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for step in sorted(by_step):
            line = [step]
            for arm in arm_rows:
                r = by_step[step].get(arm, {})
                line += ["" if r.get(c) is None else repr(float(r[c])) for c in cols[arm]]
            w.writerow(line)


def cmd_ablate(args) -> int:
    base = _resolve(args)
    out = _out_dir(args, base, f"ablate-{args.suite}")
    (out).mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(cfgmod.dumps(base))
    seeds = args.seeds or [base.run.seed]
    overrides = list(args.override or ())
    summary = run_ablation(args.suite, (args.config, overrides), seeds, out, quiet=args.quiet)
    _emit(args, summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# replay


def replay_records(records, params=None) -> dict:
    """Re-simulate logged trajectories; raise ReplayDivergence at the first mismatch.

    With ``params`` the learner-turn log-probabilities are recomputed and the
    largest absolute deviation is reported (never an error).
    """
    max_dev = 0.0
    n_turns = 0
    for i, rec in enumerate(records):
        game = make_game(rec["game"], **rec.get("params", {}))
        state = game.reset(rec["seed"])
        for tr in rec["turns"]:
            where = f"trajectory {i} turn {tr['t']}"
            if state.terminal:
                raise ReplayDivergence(f"{where}: logged turn after terminal state", i, tr["t"])
            role = state.turn % 2
            if tr["t"] != state.turn or tr["role"] != role:
                raise ReplayDivergence(f"{where}: turn/role mismatch", i, tr["t"])
            key = game.observe(state, role)
            if tr["obs_key"] != key:
                raise ReplayDivergence(f"{where}: observation {tr['obs_key']!r} != {key!r}", i, tr["t"])
            if tr["action"] not in game.alphabet:
                raise ReplayDivergence(f"{where}: unknown action {tr['action']!r}", i, tr["t"])
            a = game.alphabet.index(tr["action"])
            legal = game.legal_actions(state)
            if tr["legal"] != (a in legal):
                raise ReplayDivergence(f"{where}: legality flag mismatch for {tr['action']!r}", i, tr["t"])
            if params is not None and tr.get("logprob") is not None:
                probs = action_distribution(params, key, game.n_actions, tr.get("temperature", 1.0),
                                            legal if tr.get("masked") else None)
                lp = math.log(probs[a]) if probs[a] > 0 else -math.inf
                max_dev = max(max_dev, abs(lp - tr["logprob"]))
            state = game.apply(state, a)
            n_turns += 1
        if not state.terminal:
            raise ReplayDivergence(f"trajectory {i}: log ends before a terminal state", i, None)
        if state.outcome.rho != rec["rho"] or state.outcome.reason.value != rec["reason"]:
            raise ReplayDivergence(
                f"trajectory {i}: outcome ({state.outcome.rho}, {state.outcome.reason.value}) != "
                f"logged ({rec['rho']}, {rec['reason']})", i, None,
            )
    return {"trajectories": len(records), "turns": n_turns, "divergences": 0,
            "max_logprob_deviation": max_dev if params is not None else None}


def cmd_replay(args) -> int:
    with open(args.trajectories) as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    params = load_policy(args.checkpoint) if args.checkpoint else None
    try:
        report = replay_records(records, params)
    except ReplayDivergence as exc:
        print(f"replay divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    if args.out:
        _write_json(Path(args.out), report)
    _emit(args, report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# inspect-checkpoint


def cmd_inspect(args) -> int:
    st, data = load_checkpoint(args.checkpoint)
    head = {
        "step": st.step,
        "entries": len(st.params),
        "policy_digest": st.params.digest(),
        "config_hash": data.get("config_hash"),
        "baselines": {f"{g}/p{r}": b for (g, r), b in sorted(st.baselines.b.items())},
    }
    if not args.quiet:
        print(json.dumps(head, indent=2, sort_keys=True))
        if args.table:
            sys.stdout.write(export_text(st.params))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run config")
    common.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="dotted config override in TOML value syntax (repeatable)")
    common.add_argument("--out", help="output directory or file")
    common.add_argument("--seed", type=int, help="shorthand for --override run.seed=N")
    common.add_argument("--quiet", action="store_true", help="suppress stdout reports")

    p = argparse.ArgumentParser(prog="selfplay", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="run self-play training")
    t.add_argument("--resume", action="store_true", help="continue from the latest checkpoint in --out")
    t.add_argument("--stop-at", type=int, help="stop after this many steps")
    t.add_argument("--actors", type=int, help="override run.actors")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="play a checkpoint against opponents")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--opponent", action="append",
                   help="random, scripted, script:<name> or a checkpoint path (repeatable)")
    e.add_argument("--games", type=int, default=1000)
    e.add_argument("--sample", action="store_true", help="sample actions instead of greedy play")
    e.set_defaults(fn=cmd_eval)

    x = sub.add_parser("exploitability", parents=[common], help="Kuhn best-response exploitability")
    x.add_argument("--checkpoint", required=True, help="checkpoint path, or 'uniform' / 'nash'")
    x.set_defaults(fn=cmd_exploitability)

    a = sub.add_parser("ablate", parents=[common], help="run an ablation suite")
    a.add_argument("suite", choices=("rq2", "rq4"))
    a.add_argument("--seeds", type=int, nargs="+", help="shared seeds (default: run.seed)")
    a.set_defaults(fn=cmd_ablate)

    r = sub.add_parser("replay", parents=[common], help="verify logged trajectories")
    r.add_argument("--trajectories", required=True, help="JSONL trajectory log")
    r.add_argument("--checkpoint", help="recompute log-probabilities under this checkpoint")
    r.set_defaults(fn=cmd_replay)

    i = sub.add_parser("inspect-checkpoint", parents=[common], help="summarise a checkpoint")
    i.add_argument("checkpoint")
    i.add_argument("--table", action="store_true", help="also print every logit row")
    i.set_defaults(fn=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "opponent", "absent") is None:
        args.opponent = ["random"]
    # the package logger runs at INFO for run.log; the console shows WARNING+ under --quiet
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(logging.Formatter(LOG_FORMAT))
    console.setLevel(logging.WARNING if args.quiet else logging.INFO)
    saved = log.level, log.propagate
    log.setLevel(logging.INFO)
    log.propagate = False
    log.addHandler(console)
    try:
        return _dispatch(args)
    finally:
        log.removeHandler(console)
        log.setLevel(saved[0])
        log.propagate = saved[1]


def _dispatch(args) -> int:
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except TrainingAborted as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_ABORTED
    except ReplayDivergence as exc:
        print(f"replay divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SelfPlayError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
