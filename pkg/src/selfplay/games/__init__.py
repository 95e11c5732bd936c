from ..core import register_game
from .connect_four import ConnectFour
from .kuhn import KuhnPoker, kuhn_round_settle
from .liars_dice import LiarsDice
from .negotiation import SimpleNegotiation, negotiation_settle
from .pig import PigDice, pig_apply
from .tictactoe import TicTacToe, tictactoe_winner
from .toy import ToyHorizon

for _cls in (TicTacToe, KuhnPoker, SimpleNegotiation, PigDice, LiarsDice, ConnectFour, ToyHorizon):
    register_game(_cls.name, _cls)

__all__ = [
    "ConnectFour",
    "KuhnPoker",
    "LiarsDice",
    "PigDice",
    "SimpleNegotiation",
    "TicTacToe",
    "ToyHorizon",
    "kuhn_round_settle",
    "negotiation_settle",
    "pig_apply",
    "tictactoe_winner",
]
