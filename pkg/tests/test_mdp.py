import math

import numpy as np
import pytest

from seal.cartpole import CartPoleEnv
from seal.exceptions import DomainError, UsageError
from seal.mdp import run_episode

STATE1 = np.array([-5.0, 0.0, math.radians(-25.0), 0.0])
STATE2 = np.array([-5.0, 0.0, math.radians(25.0), 0.0])
TERMINAL = np.array([-6.0, 0.0, math.radians(-26.0), 0.0])


def test_reset_watermark_gives_first_state(wm_env):
    np.testing.assert_array_equal(wm_env.reset(), STATE1)


def test_reset_cartpole_without_noise_is_origin():
    env = CartPoleEnv(init_noise=0.0)
    np.testing.assert_array_equal(env.reset(), np.zeros(4))


def test_reset_is_reproducible_under_seed():
    a = CartPoleEnv().reset(seed=7)
    b = CartPoleEnv().reset(seed=7)
    np.testing.assert_array_equal(a, b)


def test_watermark_link_step(wm_env):
    wm_env.reset()
    out = wm_env.step(1)
    np.testing.assert_array_equal(out.next_state, STATE2)
    assert out.reward == 1.0 and out.done is False


def test_watermark_wrong_action_terminates(wm_env):
    wm_env.reset()
    out = wm_env.step(0)
    np.testing.assert_array_equal(out.next_state, TERMINAL)
    assert out.reward == -1.0 and out.done is True and not out.truncated


@pytest.mark.parametrize("make", ["watermark", "cartpole"])
def test_done_forced_at_step_cap(make, wm_env):
    if make == "watermark":
        env, policy = wm_env, wm_env.optimal_policy()
    else:
        # a stub subclass that never fails, so only the cap can end the episode
        class NeverFails(CartPoleEnv):
            def _transition(self, action):
                return (0.0, 0.0, 0.0, 0.0), 1.0, False
        env, policy = NeverFails(), (lambda s: 0)
    state = env.reset()
    for t in range(1, 501):
        out = env.step(policy(state))
        state = out.next_state
        assert out.done == (t == 500)
    assert out.truncated


def test_step_after_done_is_usage_error(wm_env):
    wm_env.reset()
    wm_env.step(0)
    with pytest.raises(UsageError):
        wm_env.step(0)


def test_step_before_reset_is_usage_error():
    with pytest.raises(UsageError):
        CartPoleEnv().step(0)


@pytest.mark.parametrize("action", [-1, 2, 1.5, "a"])
def test_out_of_range_action_is_domain_error(action, cartpole):
    cartpole.reset()
    with pytest.raises(DomainError):
        cartpole.step(action)


def test_run_episode_perfect_watermark_policy(wm_env):
    trace = run_episode(wm_env, wm_env.optimal_policy(), 500)
    assert trace.total_reward == 500 and trace.length == 500
    assert trace.transitions[-1].done


def test_run_episode_always_wrong(wm_env):
    good = wm_env.optimal_policy()
    trace = run_episode(wm_env, lambda s: 1 - good(s), 500)
    assert trace.total_reward == -1 and trace.length == 1


def test_run_episode_zero_steps(cartpole):
    trace = run_episode(cartpole, lambda s: 0, 0)
    assert trace.length == 0 and trace.total_reward == 0


def test_run_episode_stops_at_max_steps(wm_env):
    trace = run_episode(wm_env, wm_env.optimal_policy(), 7)
    assert trace.length == 7 and not trace.transitions[-1].done


def test_trace_total_is_sum_of_rewards(cartpole):
    rng = np.random.default_rng(3)
    trace = run_episode(cartpole, lambda s: int(rng.integers(2)))
    assert trace.total_reward == sum(t.reward for t in trace.transitions)
    assert trace.length <= cartpole.max_steps


def test_replayability_with_identical_rng_state():
    a, b = CartPoleEnv(seed=11), CartPoleEnv(seed=11)
    sa, sb = a.reset(), b.reset()
    np.testing.assert_array_equal(sa, sb)
    actions = np.random.default_rng(0).integers(2, size=40)
    for act in actions:
        oa, ob = a.step(int(act)), b.step(int(act))
        np.testing.assert_array_equal(oa.next_state, ob.next_state)
        assert (oa.reward, oa.done) == (ob.reward, ob.done)
        assert np.isfinite(oa.next_state).all()
        if oa.done:
            break


def test_meta_exposes_contract(cartpole, wm_env):
    assert (cartpole.state_dim, cartpole.n_actions, cartpole.max_steps) == (4, 2, 500)
    assert (wm_env.state_dim, wm_env.n_actions, wm_env.max_steps) == (4, 2, 500)
