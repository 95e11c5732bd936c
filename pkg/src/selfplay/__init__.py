"""Self-play policy-gradient training for two-player zero-sum turn-based games."""

from .advantage import AdvantageRecord, BaselineTable
from .config import RunConfig
from .core import (
    ActionToken,
    Game,
    GameState,
    Outcome,
    Reason,
    active_role,
    apply,
    legal_actions,
    make_game,
    observe,
    outcome,
    reset,
)
from .policy import PolicyParams, action_distribution, logprob_gradient, sample
from .runtime import collect_batch, train

__version__ = "0.1.0"
