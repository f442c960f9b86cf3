import numpy as np
import pytest

from seal.dqn import (DQNAgent, ExplorationSchedule, Hyperparams, PrioritizedReplayBuffer, QNetwork,
                      q_values, select_action, sync_target, td_loss_and_grads, td_train_step)
from seal.dqn.network import Adam
from seal.exceptions import DomainError, TrainingFault, UsageError


# -- network ------------------------------------------------------------------

def test_zero_network_outputs_zero():
    net = QNetwork(4, 2, zero=True)
    np.testing.assert_array_equal(q_values(net, [1.0, -2.0, 3.0, 0.5]), [0.0, 0.0])


def test_single_layer_affine_by_hand():
    net = QNetwork(2, 2, hidden_sizes=(), zero=True)
    W, b = net.params
    W[...] = [[1.0, 2.0], [0.0, -1.0]]
    b[...] = [0.5, -0.5]
    # [3, 4] @ W + b = [3*1 + 4*0, 3*2 - 4*1] + b = [3.5, 1.5]
    np.testing.assert_array_equal(q_values(net, [3.0, 4.0]), [3.5, 1.5])


def test_forward_is_deterministic(rng):
    net = QNetwork(4, 2, rng=rng)
    s = rng.normal(size=4)
    np.testing.assert_array_equal(q_values(net, s), q_values(net, s))


def test_dimension_mismatch():
    net = QNetwork(4, 2)
    with pytest.raises(DomainError):
        q_values(net, [1.0, 2.0, 3.0])


def test_params_are_views_of_flat(rng):
    net = QNetwork(4, 2, (8,), rng=rng)
    net.flat[0] = 123.0
    assert net.params[0][0, 0] == 123.0
    assert net.flat.size == 4 * 8 + 8 + 8 * 2 + 2


# -- action selection -----------------------------------------------------------

def test_greedy_when_eps_zero(rng):
    net = QNetwork(4, 2, rng=rng)
    states = rng.normal(size=(50, 4))
    for s in states:
        assert select_action(net, s, 0.0, rng) == int(np.argmax(q_values(net, s)))


def test_uniform_when_eps_one():
    net = QNetwork(4, 2, zero=True)
    rng = np.random.default_rng(1)
    acts = [select_action(net, np.zeros(4), 1.0, rng) for _ in range(100_000)]
    freq = np.bincount(acts, minlength=2) / len(acts)
    np.testing.assert_allclose(freq, [0.5, 0.5], atol=0.01)


def test_ties_pick_lowest_index(rng):
    net = QNetwork(4, 3, zero=True)
    assert select_action(net, np.ones(4), 0.0, rng) == 0


# -- prioritized replay -----------------------------------------------------------

def _fill(buf, n):
    for i in range(n):
        buf.store(np.full(buf.states.shape[1], float(i)), i % 2, float(i), np.zeros(buf.states.shape[1]), False)


def test_alpha_zero_is_uniform():
    buf = PrioritizedReplayBuffer(10, 1, alpha=0.0)
    _fill(buf, 10)
    buf.update_priorities(np.arange(10), np.arange(1, 11, dtype=float))
    rng = np.random.default_rng(0)
    counts = np.zeros(10)
    for _ in range(10_000):
        _, _, idx = buf.sample(10, rng)
        counts += np.bincount(idx, minlength=10)
    np.testing.assert_allclose(counts / counts.sum(), 0.1, atol=0.01)


def test_sampling_proportional_to_priority():
    buf = PrioritizedReplayBuffer(2, 1, alpha=1.0)
    _fill(buf, 2)
    buf.update_priorities(np.array([0, 1]), np.array([1.0, 3.0]))
    rng = np.random.default_rng(0)
    counts = np.zeros(2)
    for _ in range(50_000):
        _, _, idx = buf.sample(2, rng)
        counts += np.bincount(idx, minlength=2)
    assert counts[1] / counts[0] == pytest.approx(3.0, rel=0.05)


def test_ring_evicts_oldest():
    buf = PrioritizedReplayBuffer(2, 1)
    _fill(buf, 3)
    assert len(buf) == 2
    assert sorted(buf.states[:, 0]) == [1.0, 2.0]


def test_underfull_sample_is_usage_error(rng):
    buf = PrioritizedReplayBuffer(10, 1)
    _fill(buf, 3)
    with pytest.raises(UsageError):
        buf.sample(4, rng)


def test_new_entries_get_max_priority():
    buf = PrioritizedReplayBuffer(10, 1, alpha=1.0)
    _fill(buf, 2)
    buf.update_priorities(np.array([0]), np.array([7.0]))
    buf.store(np.zeros(1), 0, 0.0, np.zeros(1), False)
    assert buf.weights[2] == 7.0


def test_importance_weights_formula():
    buf = PrioritizedReplayBuffer(4, 1, alpha=1.0, beta=0.5)
    _fill(buf, 4)
    buf.update_priorities(np.arange(4), np.array([1.0, 2.0, 3.0, 4.0]))
    _, w, idx = buf.sample(4, np.random.default_rng(0))
    p = np.array([1.0, 2.0, 3.0, 4.0])[idx] / 10.0
    expected = (4 * p) ** -0.5
    np.testing.assert_allclose(w, expected / expected.max())


def test_priority_floor():
    buf = PrioritizedReplayBuffer(4, 1, alpha=0.6, eps=1e-6)
    _fill(buf, 4)
    buf.update_priorities(np.arange(4), np.zeros(4))
    assert np.all(buf.probabilities() > 0)


# -- TD update ---------------------------------------------------------------------

def _hand_net():
    # 1 input -> 1 relu unit -> 2 actions
    net = QNetwork(1, 2, hidden_sizes=(1,), zero=True)
    net.params[0][...] = [[2.0]]
    net.params[1][...] = [0.5]
    net.params[2][...] = [[1.0, -1.0]]
    net.params[3][...] = [0.0, 0.25]
    return net


def _batch(done):
    return {"states": np.array([[1.0]]), "actions": np.array([0]), "rewards": np.array([1.0]),
            "next_states": np.array([[-1.0]]), "dones": np.array([float(done)])}


def test_huber_loss_by_hand():
    net = _hand_net()
    # Q(s=1) = [2.5, -2.25]; Q_target(s'=-1) = relu(-1.5) -> [0, 0.25]
    # y = 1 + 0.5 * 0.25 = 1.125, td = 1.375 > 1 -> huber = 1.375 - 0.5
    loss, _, td = td_loss_and_grads(net, net.copy(), _batch(False), np.ones(1), gamma=0.5)
    assert td[0] == pytest.approx(1.375)
    assert loss == pytest.approx(0.875)


def test_done_transition_target_is_reward():
    net = _hand_net()
    loss, _, td = td_loss_and_grads(net, net.copy(), _batch(True), np.ones(1), gamma=0.5)
    # y = r = 1, td = 1.5, huber = 1.0
    assert td[0] == pytest.approx(1.5)
    assert loss == pytest.approx(1.0)


def test_small_td_is_quadratic():
    net = _hand_net()
    batch = _batch(True)
    batch["rewards"] = np.array([2.2])
    loss, _, td = td_loss_and_grads(net, net.copy(), batch, np.ones(1), gamma=0.5)
    assert loss == pytest.approx(0.5 * 0.3 ** 2)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    net = QNetwork(4, 2, (8,), rng=rng)
    target = QNetwork(4, 2, (8,), rng=rng)
    n = 6
    batch = {"states": rng.normal(size=(n, 4)), "actions": rng.integers(2, size=n),
             "rewards": rng.normal(size=n), "next_states": rng.normal(size=(n, 4)),
             "dones": (rng.random(n) < 0.3).astype(float)}
    weights = rng.uniform(0.2, 1.0, size=n)
    _, grads, _ = td_loss_and_grads(net, target, batch, weights, 0.99)
    analytic = net.flatten_grads(grads)
    h = 1e-5
    numeric = np.zeros_like(analytic)
    for i in range(net.flat.size):
        orig = net.flat[i]
        net.flat[i] = orig + h
        up, _, _ = td_loss_and_grads(net, target, batch, weights, 0.99)
        net.flat[i] = orig - h
        down, _, _ = td_loss_and_grads(net, target, batch, weights, 0.99)
        net.flat[i] = orig
        numeric[i] = (up - down) / (2 * h)
    rel = np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    assert rel.max() < 1e-4


def test_train_step_reduces_loss_on_fixed_batch():
    rng = np.random.default_rng(0)
    hp = Hyperparams(batch_size=8, learning_rate=1e-2)
    net = QNetwork(4, 2, (16,), rng=rng)
    target = net.copy()
    buf = PrioritizedReplayBuffer(8, 4, alpha=0.0)
    for _ in range(8):
        buf.store(rng.normal(size=4), int(rng.integers(2)), 1.0, rng.normal(size=4), True)
    opt = Adam(net.flat.size, lr=1e-2)
    first = td_train_step(net, target, buf, hp, rng, opt)
    for _ in range(200):
        last = td_train_step(net, target, buf, hp, rng, opt)
    assert last < first


def test_train_step_updates_priorities():
    rng = np.random.default_rng(0)
    hp = Hyperparams(batch_size=4)
    net = QNetwork(4, 2, (8,), rng=rng)
    buf = PrioritizedReplayBuffer(4, 4, alpha=1.0)
    for _ in range(4):
        buf.store(rng.normal(size=4), 0, 5.0, rng.normal(size=4), True)
    before = buf.weights.copy()
    td_train_step(net, net.copy(), buf, hp, rng, Adam(net.flat.size))
    assert not np.array_equal(before, buf.weights)
    assert np.all(buf.weights > 0)


def test_nonfinite_loss_is_training_fault():
    rng = np.random.default_rng(0)
    net = QNetwork(4, 2, (8,), rng=rng)
    buf = PrioritizedReplayBuffer(4, 4)
    for _ in range(4):
        buf.store(np.zeros(4), 0, np.inf, np.zeros(4), True)
    with pytest.raises(TrainingFault) as info:
        td_train_step(net, net.copy(), buf, Hyperparams(batch_size=4), rng, Adam(net.flat.size))
    assert "loss" in info.value.diagnostics


# -- target network --------------------------------------------------------------------

def test_sync_target_exact_and_idempotent(rng):
    net = QNetwork(4, 2, rng=rng)
    target = QNetwork(4, 2, rng=np.random.default_rng(99))
    sync_target(net, target)
    states = rng.normal(size=(100, 4))
    np.testing.assert_array_equal(net.forward(states), target.forward(states))
    snapshot = target.flat.copy()
    sync_target(net, target)
    np.testing.assert_array_equal(target.flat, snapshot)


def test_target_untouched_by_train_step():
    rng = np.random.default_rng(0)
    net = QNetwork(4, 2, (8,), rng=rng)
    target = net.copy()
    snapshot = target.flat.copy()
    buf = PrioritizedReplayBuffer(8, 4)
    for _ in range(8):
        buf.store(rng.normal(size=4), 1, 1.0, rng.normal(size=4), False)
    opt = Adam(net.flat.size)
    for _ in range(5):
        td_train_step(net, target, buf, Hyperparams(batch_size=4), rng, opt)
    np.testing.assert_array_equal(target.flat, snapshot)
    assert not np.array_equal(net.flat, snapshot)


# -- exploration --------------------------------------------------------------------------

def test_schedule_endpoints():
    sched = ExplorationSchedule.from_hyperparams(Hyperparams())
    assert sched.horizon == 10_000
    assert sched(0) == 1.0
    assert sched(10_000) == 0.02
    assert sched(100_000) == 0.02
    assert sched(5_000) == pytest.approx(0.51)


def test_schedule_monotone():
    sched = ExplorationSchedule(1000)
    values = [sched(t) for t in range(0, 2000, 7)]
    assert all(a >= b for a, b in zip(values, values[1:]))


# -- agent -------------------------------------------------------------------------------

def test_agent_is_bit_reproducible():
    def run():
        agent = DQNAgent(4, 2, Hyperparams(learning_starts=10, batch_size=4, target_update_freq=7), seed=3)
        rng = np.random.default_rng(0)
        s = rng.normal(size=4)
        for _ in range(60):
            a = agent.act(s)
            s2 = rng.normal(size=4)
            agent.observe(s, a, 1.0, s2, bool(rng.random() < 0.1))
            s = s2
        return agent.net.flat.copy()
    np.testing.assert_array_equal(run(), run())


def test_hyperparams_validation():
    from seal.exceptions import ConfigurationError
    with pytest.raises(ConfigurationError):
        Hyperparams(gamma=0.0)
    with pytest.raises(ConfigurationError):
        Hyperparams(target_update_freq=0)
