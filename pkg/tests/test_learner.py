import math

import numpy as np
import pytest

from selfplay import config
from selfplay.core import make_game
from selfplay.errors import MissingAdvantage, NonFiniteGradient, SnapshotMismatch
from selfplay.learner import (
    GradientAccumulator,
    OptimizerState,
    _batch_gradient,
    accumulate_reinforce,
    apply_gradient,
    clip_global_norm,
    proximal_step,
    surrogate_objective,
)
from selfplay.policy import PolicyParams
from selfplay.runtime import play_trajectory
from selfplay.trajectory import Trajectory, TurnRecord

from _support import fd_gradient

LN_HALF = math.log(0.5)


def _turn(t, key, action, logprob=LN_HALF, n=2, role=None):
    return TurnRecord(t, t % 2 if role is None else role, key, action, logprob, True, n)


def _batch(params, game, n, mask="full", seed=0):
    return [play_trajectory(game, seed * 1000 + i, seed * 7 + i, params, 1.0, mask) for i in range(n)]


def _random_params(game, rng, keys):
    return PolicyParams({k: rng.normal(size=game.n_actions) for k in keys})


def test_single_turn_example():
    traj = Trajectory("X", 0, [_turn(0, "k", 0)], (1, -1))
    acc = accumulate_reinforce([traj], [(1.0, -1.0)], PolicyParams())
    np.testing.assert_allclose(acc.rows["k"], [0.5, -0.5], atol=1e-15)


def test_zero_advantage_annihilates():
    traj = Trajectory("X", 0, [_turn(0, "k", 0), _turn(1, "j", 1)], (0, 0))
    acc = accumulate_reinforce([traj], [(0.0, 0.0)], PolicyParams())
    assert acc.global_norm == 0.0 and not acc.nonzero_rows()


def test_no_length_normalisation():
    one = Trajectory("X", 0, [_turn(0, "k", 0, role=0)], (1, -1))
    two = Trajectory("X", 0, [_turn(0, "k", 0, role=0), _turn(2, "k", 0, role=0)], (1, -1))
    g1 = accumulate_reinforce([one], [(1.0, -1.0)], PolicyParams()).rows["k"]
    g2 = accumulate_reinforce([two], [(1.0, -1.0)], PolicyParams()).rows["k"]
    np.testing.assert_allclose(g2, 2 * g1, atol=0)


def test_errors():
    traj = Trajectory("X", 0, [_turn(0, "k", 0)], (1, -1))
    with pytest.raises(MissingAdvantage):
        accumulate_reinforce([traj], None, PolicyParams())
    with pytest.raises(MissingAdvantage):
        accumulate_reinforce([traj], [(float("nan"), 0.0)], PolicyParams())
    with pytest.raises(SnapshotMismatch):
        accumulate_reinforce([traj], [(1.0, -1.0)], PolicyParams({"k": [1.0, 0.0]}))


def test_epoch_one_equals_reinforce():
    g = make_game("KuhnPoker", rounds_total=1)
    rng = np.random.default_rng(0)
    keys = [f"KuhnPoker/p{r}/{c}|h={h}" for r in (0, 1) for c in "JQK" for h in ("", "bet", "check", "check,bet")]
    params = _random_params(g, rng, keys)
    batch = _batch(params, g, 64)
    advs = [(rng.normal(), rng.normal()) for _ in batch]
    ref = accumulate_reinforce(batch, advs, params)
    acc, clip_frac, _ = _batch_gradient(params, batch, advs, 0.2, True)
    assert clip_frac == 0.0
    assert ref.rows.keys() == acc.rows.keys()
    for k in ref.rows:
        np.testing.assert_allclose(acc.rows[k], ref.rows[k], rtol=0, atol=1e-12)


def test_sgd_unclipped_single_epoch_equals_lr_times_reinforce():
    g = make_game("TicTacToe")
    params = PolicyParams()
    batch = _batch(params, g, 32, mask="legal", seed=3)
    advs = [(t.returns[0] * 0.7, t.returns[1] * 0.7) for t in batch]
    cfg = config.LearnerConfig(optimizer="sgd", inner_epochs=1, clip_eps=math.inf, max_grad_norm=math.inf,
                               learning_rate=0.05)
    new, _, report = proximal_step(params, batch, advs, OptimizerState(), cfg)
    ref = accumulate_reinforce(batch, advs, params)
    assert not report.clipped
    for k, row in ref.rows.items():
        np.testing.assert_allclose(new.logits(k, 9), 0.05 * row, rtol=0, atol=1e-15)


def test_zero_advantage_fixed_point_bit_identical():
    g = make_game("KuhnPoker", rounds_total=1)
    params = _random_params(g, np.random.default_rng(1), ["KuhnPoker/p0/J|h="])
    batch = _batch(params, g, 16)
    new, opt, report = proximal_step(params, batch, [(0.0, 0.0)] * 16, OptimizerState(), config.LearnerConfig())
    assert new == params and opt.step == 0 and report.gradient_norm_pre_clip == 0.0


def test_global_norm_clip():
    acc = GradientAccumulator({"a": np.array([3.0, 4.0]), "b": np.array([12.0])})
    norm, clipped = clip_global_norm(acc, 1.0)
    assert norm == 13.0 and clipped and acc.global_norm <= 1.0 + 1e-9
    acc = GradientAccumulator({"a": np.array([0.3, 0.4])})
    assert clip_global_norm(acc, 1.0) == (0.5, False)


def test_clip_monotonicity():
    g = make_game("KuhnPoker", rounds_total=1)
    rng = np.random.default_rng(5)
    params = _random_params(g, rng, ["KuhnPoker/p0/Q|h=", "KuhnPoker/p1/K|h=bet"])
    batch = _batch(params, g, 64)
    moved = params.with_rows({k: v + rng.normal(scale=0.5, size=v.size) for k, v in params.table.items()})
    fracs = [_batch_gradient(moved, batch, [(1.0, -1.0)] * 64, eps)[1] for eps in (0.05, 0.1, 0.2, 0.5, 1.0, 5.0)]
    assert all(a >= b for a, b in zip(fracs, fracs[1:]))


def test_vanilla_equals_rae_with_zero_baseline():
    from selfplay.advantage import BaselineTable

    g = make_game("KuhnPoker", rounds_total=1)
    batch = _batch(PolicyParams(), g, 16)
    vanilla = [(float(t.returns[0]), float(t.returns[1])) for t in batch]
    zero = BaselineTable(alpha=1.0)  # baseline stays 0
    recs = zero.process_batch([(t.game, r, t.returns[r]) for t in batch for r in (0, 1)])
    rae = [(recs[2 * i].advantage, recs[2 * i + 1].advantage) for i in range(len(batch))]
    assert rae == vanilla
    a = accumulate_reinforce(batch, vanilla, PolicyParams())
    b = accumulate_reinforce(batch, rae, PolicyParams())
    assert all(np.array_equal(a.rows[k], b.rows[k]) for k in a.rows)


def test_all_positive_returns_raise_taken_actions():
    g = make_game("TicTacToe")
    batch = _batch(PolicyParams(), g, 8, mask="legal")
    acc = accumulate_reinforce(batch, [(1.0, 1.0)] * 8, PolicyParams())
    for traj in batch:
        for tr in traj.turns:
            if len(tr.mask) > 1:  # a forced move has zero gradient
                assert acc.rows[tr.obs_key][tr.action] > 0


def test_end_to_end_finite_differences_on_toy_game():
    """Batch surrogate gradient vs central differences on a frozen 2-state game."""
    g = make_game("ToyHorizon", horizon=2, alphabet_size=3, legal_count=2)
    rng = np.random.default_rng(7)
    keys = ["ToyHorizon/p0/t=0", "ToyHorizon/p1/t=1"]
    params = _random_params(g, rng, keys)
    for mask in ("full", "legal"):
        batch = _batch(params, g, 40, mask=mask, seed=11)
        advs = [(rng.normal(), rng.normal()) for _ in batch]
        # move away from the collection point but stay inside the clip band
        probe = params.with_rows({k: v + rng.normal(scale=0.02, size=3) for k, v in params.table.items()})
        for eps in (math.inf, 0.2):
            acc, _, _ = _batch_gradient(probe, batch, advs, eps)
            theta = np.concatenate([probe.logits(k, 3) for k in keys])

            def f(x):
                return surrogate_objective(PolicyParams({keys[0]: x[:3], keys[1]: x[3:]}), batch, advs, eps)

            fd = fd_gradient(f, theta)
            ana = np.concatenate([acc.get(k, 3) for k in keys])
            assert np.abs(ana - fd).max() / max(np.abs(fd).max(), 1e-12) <= 1e-5


def test_adam_touches_only_gradient_rows():
    params = PolicyParams({"a": [0.0, 0.0], "b": [1.0, 2.0]})
    acc = GradientAccumulator({"a": np.array([1.0, -1.0])})
    cfg = config.LearnerConfig(learning_rate=0.1)
    new, opt = apply_gradient(params, OptimizerState(), acc, cfg)
    assert list(new.logits("b", 2)) == [1.0, 2.0]
    # first Adam step moves each coordinate by ~lr in the gradient's sign (ascent)
    np.testing.assert_allclose(new.logits("a", 2), [0.1, -0.1], rtol=1e-6)
    assert opt.step == 1 and set(opt.m) == {"a"}
    back = OptimizerState.from_dict(opt.to_dict())
    assert back.step == 1 and np.array_equal(back.m["a"], opt.m["a"])


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning", "ignore:invalid value:RuntimeWarning")
def test_non_finite_gradient_raises_without_commit():
    # two turns at one key whose summed coefficients overflow to inf
    traj = Trajectory("X", 0, [_turn(0, "k", 0, role=0), _turn(2, "k", 0, role=0)], (1, -1))
    with pytest.raises(NonFiniteGradient):
        proximal_step(PolicyParams(), [traj], [(1e308, 0.0)], OptimizerState(), config.LearnerConfig())
