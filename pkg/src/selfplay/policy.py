"""Tabular softmax policy over observation keys.

A :class:`PolicyParams` maps observation keys to logit vectors over the
game's full alphabet. Missing keys read as zero logits, i.e. the uniform
distribution. Params are immutable: updates produce a new object that
shares untouched rows, so an actor holding an older object never sees a
half-applied update. A snapshot is therefore the params object itself.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .core import KEY_GRAMMAR_VERSION, Game, default_game
from .errors import EmptyLegalSet, SelfPlayError, ZeroProbabilityAction

FORMAT_VERSION = 1

_FULL_MASKS: dict[int, np.ndarray] = {}


def make_mask(n_actions: int, legal: Sequence[int] | None) -> np.ndarray:
    """Boolean mask over the alphabet; ``legal=None`` means the full alphabet."""
    if legal is None:
        m = _FULL_MASKS.get(n_actions)
        if m is None:
            m = np.ones(n_actions, dtype=np.bool_)
            m.flags.writeable = False
            _FULL_MASKS[n_actions] = m
        return m
    m = np.zeros(n_actions, dtype=np.bool_)
    m[list(legal)] = True
    return m


class PolicyParams:
    """Immutable logit table. ``version`` is the serialization format."""

    version = FORMAT_VERSION

    def __init__(self, table: Mapping[str, np.ndarray] | None = None):
        rows = {}
        for k, v in (table or {}).items():
            a = np.array(v, dtype=np.float64)
            a.flags.writeable = False
            rows[k] = a
        self._rows = rows

    @classmethod
    def _wrap(cls, rows: dict) -> "PolicyParams":
        obj = cls.__new__(cls)
        obj._rows = rows
        return obj

    @property
    def table(self) -> Mapping[str, np.ndarray]:
        return MappingProxyType(self._rows)

    def __len__(self):
        return len(self._rows)

    def __contains__(self, key):
        return key in self._rows

    def logits(self, key: str, n_actions: int) -> np.ndarray:
        row = self._rows.get(key)
        if row is None:
            return np.zeros(n_actions)
        if row.shape[0] != n_actions:
            raise SelfPlayError(f"key {key!r} has {row.shape[0]} logits, expected {n_actions}")
        return row

    def with_rows(self, updates: Mapping[str, np.ndarray]) -> "PolicyParams":
        rows = dict(self._rows)
        for k, v in updates.items():
            a = np.array(v, dtype=np.float64)
            a.flags.writeable = False
            rows[k] = a
        return PolicyParams._wrap(rows)

    def snapshot(self) -> "PolicyParams":
        return self

    def digest(self) -> str:
        h = hashlib.sha256()
        for k in sorted(self._rows):
            h.update(k.encode())
            h.update(self._rows[k].tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, PolicyParams):
            return NotImplemented
        if self._rows.keys() != other._rows.keys():
            return False
        return all(np.array_equal(self._rows[k], other._rows[k]) for k in self._rows)

    __hash__ = None


def snapshot(params: PolicyParams) -> PolicyParams:
    return params.snapshot()


@dataclass(frozen=True)
class ActionSample:
    action: int
    logprob: float
    distribution_entropy: float


def action_distribution(params, obs: str, n_actions: int, temperature: float = 1.0, legal=None) -> np.ndarray:
    """softmax(logits / temperature), restricted to ``legal`` when given."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if legal is not None and len(legal) == 0:
        raise EmptyLegalSet(f"no legal actions at {obs!r}")
    return kernels.masked_softmax(params.logits(obs, n_actions), make_mask(n_actions, legal), float(temperature))


def sample(params, obs: str, n_actions: int, temperature: float, legal, u: float) -> ActionSample:
    """Inverse-CDF draw in alphabet order using the caller's uniform ``u``."""
    probs = action_distribution(params, obs, n_actions, temperature, legal)
    a = int(kernels.sample_index(probs, u))
    return ActionSample(a, float(np.log(probs[a])), float(kernels.entropy(probs)))


def greedy(params, obs: str, n_actions: int, legal=None) -> int:
    """Argmax over the allowed actions; ties go to the lowest index."""
    z = params.logits(obs, n_actions)
    if legal is None:
        return int(np.argmax(z))
    legal = list(legal)
    return legal[int(np.argmax(z[legal]))]


def logprob_gradient(params, obs: str, n_actions: int, action: int, temperature: float = 1.0, legal=None) -> np.ndarray:
    """d log pi(action) / d logits for the row of ``obs``."""
    mask = make_mask(n_actions, legal)
    probs = kernels.masked_softmax(params.logits(obs, n_actions), mask, float(temperature))
    if probs[action] <= 0.0:
        raise ZeroProbabilityAction(f"action {action} has zero probability at {obs!r}")
    return kernels.logprob_grad(probs, action, float(temperature), mask)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _games_for(params: PolicyParams, games: Sequence[Game] | None) -> dict[str, list[str]]:
    out = {}
    for g in games or ():
        out[g.name] = list(g.alphabet)
    for key in params.table:
        name = key.split("/", 1)[0]
        if name not in out:
            try:
                out[name] = list(default_game(name).alphabet)
            except SelfPlayError:
                out[name] = []
    return out


def policy_to_dict(params: PolicyParams, games: Sequence[Game] | None = None) -> dict:
    return {
        "format": "selfplay-policy",
        "version": FORMAT_VERSION,
        "key_grammar": KEY_GRAMMAR_VERSION,
        "games": _games_for(params, games),
        "entries": {k: [float(x) for x in params.table[k]] for k in sorted(params.table)},
    }


def policy_from_dict(data: dict) -> PolicyParams:
    if data.get("format") != "selfplay-policy":
        raise SelfPlayError("not a policy document")
    if data.get("version") != FORMAT_VERSION:
        raise SelfPlayError(f"unsupported policy format version {data.get('version')}")
    return PolicyParams({k: np.array(v, dtype=np.float64) for k, v in data["entries"].items()})


def dumps_policy(params: PolicyParams, games: Sequence[Game] | None = None) -> str:
    return json.dumps(policy_to_dict(params, games), sort_keys=True, separators=(",", ":"))


def loads_policy(text: str) -> PolicyParams:
    return policy_from_dict(json.loads(text))


def export_text(params: PolicyParams) -> str:
    """One line per key: the key, a tab, then space-separated logits."""
    lines = []
    for k in sorted(params.table):
        lines.append(k + "\t" + " ".join(repr(float(x)) for x in params.table[k]))
    return "\n".join(lines) + ("\n" if lines else "")
