"""Match play, tournaments and the per-checkpoint metrics row."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import agents, kernels
from .core import Game, Stream, make_game
from .policy import action_distribution

Z95 = 1.959963984540054


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return (math.nan, math.nan)
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (centre - half, centre + half)


@dataclass
class MatchReport:
    game: str
    agent_a: str
    agent_b: str
    n_games: int
    wins: int = 0
    draws: int = 0
    losses: int = 0
    win_rate: float = math.nan
    win_rate_low: float = math.nan
    win_rate_high: float = math.nan
    nonloss_rate: float = math.nan
    mean_game_length: float = 0.0
    invalid_frequency: tuple = (0.0, 0.0)
    a_as_role0: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["invalid_frequency"] = list(self.invalid_frequency)
        return d


def play_game(agent0, agent1, game: Game, match_seed: int, agent_seed: int):
    """One match with ``agent0`` in role 0. Returns the terminal state and the action count."""
    state = game.reset(match_seed)
    streams = (Stream(agent_seed), Stream(agent_seed ^ 0x9E3779B9))
    seats = (agent0, agent1)
    n = 0
    while not state.terminal:
        role = state.turn % 2
        a = seats[role].act(game, state, streams[role])
        state = game.apply(state, a)
        n += 1
    return state, n


def play_match(agent_a, agent_b, game, n_games: int, seed: int, randomize_start: bool = True) -> MatchReport:
    """``n_games`` seeded matches; A's role is drawn per game (or alternated).

    ``win_rate`` counts decisive games only; ``nonloss_rate`` is
    (wins + draws) / n_games. Invalid-move frequency is forfeits caused by
    each agent per game.
    """
    if isinstance(game, str):
        game = make_game(game)
    rep = MatchReport(game.name, getattr(agent_a, "name", "A"), getattr(agent_b, "name", "B"), n_games)
    lengths = []
    invalid = [0, 0]
    for i in range(n_games):
        words = np.random.SeedSequence([seed & 0xFFFFFFFF, i]).generate_state(3, np.uint64)
        a_role = int(words[0] & 1) if randomize_start else i % 2
        match_seed = int(words[1])
        agent_seed = int(words[2])
        seats = (agent_a, agent_b) if a_role == 0 else (agent_b, agent_a)
        final, n = play_game(seats[0], seats[1], game, match_seed, agent_seed)
        lengths.append(n)
        rep.a_as_role0 += a_role == 0
        rho_a = final.outcome.rho if a_role == 0 else -final.outcome.rho
        if rho_a > 0:
            rep.wins += 1
        elif rho_a < 0:
            rep.losses += 1
        else:
            rep.draws += 1
        if final.outcome.reason.value == "InvalidMoveForfeit":
            offender_role = (final.turn - 1) % 2
            invalid[0 if offender_role == a_role else 1] += 1
    decisive = rep.wins + rep.losses
    if decisive:
        rep.win_rate = rep.wins / decisive
        rep.win_rate_low, rep.win_rate_high = wilson_interval(rep.wins, decisive)
    if n_games:
        rep.nonloss_rate = (rep.wins + rep.draws) / n_games
        rep.mean_game_length = float(np.mean(lengths))
        rep.invalid_frequency = (invalid[0] / n_games, invalid[1] / n_games)
    return rep


@dataclass
class TournamentResult:
    game: str
    per_pair: dict = field(default_factory=dict)
    pooled: dict = field(default_factory=dict)
    averaged: dict = field(default_factory=dict)


def head_to_head(named_agents: dict, game, n_games: int, seed: int) -> TournamentResult:
    """Round robin; reports per-pair, pooled and pair-averaged win rates per agent."""
    if isinstance(game, str):
        game = make_game(game)
    names = list(named_agents)
    res = TournamentResult(game.name)
    tallies = {n: [0, 0] for n in names}
    for i, a in enumerate(names):
        for j, b in enumerate(names):
            if j <= i:
                continue
            rep = play_match(named_agents[a], named_agents[b], game, n_games, seed + 1000 * i + j)
            res.per_pair[(a, b)] = rep.win_rate
            res.per_pair[(b, a)] = 1 - rep.win_rate if not math.isnan(rep.win_rate) else math.nan
            tallies[a][0] += rep.wins
            tallies[a][1] += rep.wins + rep.losses
            tallies[b][0] += rep.losses
            tallies[b][1] += rep.wins + rep.losses
    for n in names:
        w, d = tallies[n]
        res.pooled[n] = w / d if d else math.nan
        rates = [v for (x, _), v in res.per_pair.items() if x == n and not math.isnan(v)]
        res.averaged[n] = float(np.mean(rates)) if rates else math.nan
    return res


def metrics_suite(params, games, n_games=256, seed=0, mask="full", temperature=1.0, baselines=None,
                  references=("UniformRandomLegal",)) -> dict:
    """Win rate vs reference opponents, invalid-move frequency, game length and policy entropy."""
    row = {}
    for gi, game in enumerate(games):
        if isinstance(game, str):
            game = make_game(game)
        sampler = agents.PolicyAgent(params, greedy=False, temperature=temperature, mask=mask)
        for ri, ref in enumerate(references):
            opp = agents.RandomLegalAgent() if ref == "UniformRandomLegal" else agents.ScriptedAgent(ref)
            rep = play_match(sampler, opp, game, n_games, seed + 7919 * gi + ri)
            tag = "random" if ref == "UniformRandomLegal" else ref
            row[f"{game.name}_win_rate_vs_{tag}"] = rep.win_rate
            row[f"{game.name}_nonloss_vs_{tag}"] = rep.nonloss_rate
            row[f"{game.name}_invalid_frequency"] = rep.invalid_frequency[0]
            row[f"{game.name}_mean_game_length"] = rep.mean_game_length
        row[f"{game.name}_mean_entropy"] = mean_policy_entropy(params, game, seed + gi, mask, temperature)
        if baselines is not None:
            for r in (0, 1):
                row[f"{game.name}_baseline_p{r}"] = baselines.get(game.name, r)
    return row


def mean_policy_entropy(params, game: Game, seed: int, mask="full", temperature=1.0, n_games=64) -> float:
    """Average entropy (nats) of the policy over states visited in self-play."""
    from .runtime import play_trajectory

    hs = []
    for i in range(n_games):
        t = play_trajectory(game, seed * 1_000_003 + i, seed * 7 + i, params, temperature, mask)
        for tr in t.turns:
            probs = action_distribution(params, tr.obs_key, tr.n_actions, temperature, tr.mask)
            hs.append(kernels.entropy(probs))
    return float(np.mean(hs)) if hs else 0.0


def summary_table(rows: list[dict], columns: list[str]) -> tuple[str, str]:
    """(aligned text, CSV) renderings of report rows."""
    cells = [[_cell(r.get(c)) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(cells)
    return "\n".join(lines) + "\n", buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return "" if v is None else str(v)
