import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uedlab import nets, oracle
from uedlab.ppo import (DistillConfig, PpoConfig, PpoUpdateError, combine_terms,
                        gae, kl_divergence, loss_and_grads, loss_terms,
                        policy_entropy, ppo_update, td_errors)
from uedlab.rollout import RolloutBatch

from conftest import small_params


def random_batch(rng, n=32, obs_dim=4):
    return RolloutBatch(
        observations=rng.standard_normal((n, obs_dim)),
        actions=rng.integers(0, 3, n),
        log_probs=np.log(np.full(n, 1 / 3)) + 0.05 * rng.standard_normal(n),
        advantages=rng.standard_normal(n),
        returns=rng.standard_normal(n),
        values_old=0.1 * rng.standard_normal(n),
        boundaries=[(0, n)],
    )


# -- forward --------------------------------------------------------------


def test_forward_zero_weights_gives_zero_outputs():
    params = {k: np.zeros_like(v) for k, v in small_params().items()}
    logits, values = nets.forward(params, np.ones((2, 4)))
    assert np.all(logits == 0.0) and np.all(values == 0.0)


def test_forward_softmax_normalized_and_deterministic():
    params = small_params(seed=3)
    obs = np.random.default_rng(1).standard_normal((5, 4))
    logits1, v1 = nets.forward(params, obs)
    logits2, v2 = nets.forward(params, obs)
    assert np.array_equal(logits1, logits2) and np.array_equal(v1, v2)
    assert np.allclose(nets.softmax(logits1).sum(axis=1), 1.0, atol=1e-12)


def test_forward_rejects_dim_mismatch():
    with pytest.raises(ValueError):
        nets.forward(small_params(), np.ones((2, 5)))


# -- gae ------------------------------------------------------------------


def test_gae_undiscounted_terminal_counts_rewards_to_go():
    adv, ret = gae([0, 0, 1], [0, 0, 0, 0], True, 1.0, 1.0)
    assert np.allclose(adv, [1, 1, 1])
    assert np.allclose(ret, [1, 1, 1])


def test_gae_lambda_zero_is_one_step_td():
    rng = np.random.default_rng(0)
    rewards = rng.standard_normal(20)
    values = rng.standard_normal(21)
    adv, _ = gae(rewards, values, False, 0.9, 0.0)
    assert np.allclose(adv, td_errors(rewards, values, False, 0.9), atol=1e-14)


def test_gae_matches_double_loop_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        T = int(rng.integers(1, 101))
        rewards = rng.standard_normal(T)
        values = rng.standard_normal(T + 1)
        terminal = bool(rng.integers(2))
        g, l = rng.random(), rng.random()
        fast = gae(rewards, values, terminal, g, l)
        slow = oracle.brute_force_gae(rewards, values, terminal, g, l)
        assert np.abs(fast[0] - slow[0]).max() < 1e-12
        assert np.abs(fast[1] - slow[1]).max() < 1e-12


def test_gae_rejects_bad_value_length():
    with pytest.raises(ValueError):
        gae([0.0], [0.0], False, 0.9, 0.9)


# -- entropy and kl -------------------------------------------------------


def test_entropy_uniform_and_one_hot():
    assert policy_entropy(np.zeros(3)) == pytest.approx(np.log(3), abs=1e-12)
    assert policy_entropy(np.array([50.0, 0.0, 0.0])) < 1e-6


def test_entropy_maximal_at_uniform():
    rng = np.random.default_rng(2)
    logits = rng.standard_normal((10 ** 4, 3)) * 3
    assert (policy_entropy(logits) <= np.log(3) + 1e-12).all()


def test_kl_identical_logits_zero():
    logits = np.array([0.3, -1.2, 2.0])
    assert kl_divergence(logits, logits) == pytest.approx(0.0, abs=1e-15)


def test_kl_closed_form_hand_case():
    p_logits = np.zeros(3)
    q_logits = np.array([1.0, 0.0, 0.0])
    q = np.exp(q_logits) / np.exp(q_logits).sum()
    expected = sum((1 / 3) * (np.log(1 / 3) - np.log(q[a])) for a in range(3))
    assert kl_divergence(p_logits, q_logits) == pytest.approx(expected, abs=1e-12)


def test_kl_nonnegative_random_pairs():
    rng = np.random.default_rng(3)
    p = rng.standard_normal((10 ** 4, 3)) * 2
    q = rng.standard_normal((10 ** 4, 3)) * 2
    assert (kl_divergence(p, q) >= -1e-12).all()


def test_kl_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        kl_divergence(np.zeros(3), np.zeros(4))


# -- gradients ------------------------------------------------------------


def _fd_check(cfg, kl_target=None, kl_coef=0.0, seed=0, h=1e-5):
    rng = np.random.default_rng(seed)
    params = small_params(seed=seed + 1)
    b = random_batch(rng, n=8)
    _, grads = loss_and_grads(params, b.observations, b.actions, b.log_probs,
                              b.advantages, b.returns, b.values_old, cfg,
                              kl_target_logits=kl_target, kl_coef=kl_coef)

    def f():
        t = loss_terms(params, b.observations, b.actions, b.log_probs,
                       b.advantages, b.returns, b.values_old, cfg,
                       kl_target_logits=kl_target)
        return combine_terms(t, cfg, kl_coef)

    max_rel = 0.0
    for k in params:
        flat = params[k].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            num = (fp - fm) / (2 * h)
            ana = grads[k].ravel()[i]
            max_rel = max(max_rel, abs(num - ana) / max(abs(num), abs(ana), 1e-8))
    return max_rel


def test_gradients_match_finite_differences_per_term():
    rng = np.random.default_rng(9)
    tlogits = rng.standard_normal((8, 3))
    assert _fd_check(PpoConfig(value_loss_coef=0.0)) < 1e-4
    assert _fd_check(PpoConfig(value_loss_coef=1.0, value_clipping=False)) < 1e-4
    assert _fd_check(PpoConfig(value_loss_coef=1.0, value_clipping=True)) < 1e-4
    assert _fd_check(PpoConfig(entropy_coef=0.5)) < 1e-4
    assert _fd_check(PpoConfig(), kl_target=tlogits, kl_coef=3.0) < 1e-4


def test_unclipped_ratio_uses_plain_policy_gradient():
    # with log_probs exactly reproduced, ratio == 1 (inside the clip band);
    # the surrogate gradient must match the unclipped estimator
    rng = np.random.default_rng(4)
    params = small_params(seed=5)
    b = random_batch(rng, n=10)
    logits, _ = nets.forward(params, b.observations)
    b.log_probs = nets.log_softmax(logits)[np.arange(10), b.actions]
    cfg = PpoConfig(value_loss_coef=0.0)
    _, grads = loss_and_grads(params, b.observations, b.actions, b.log_probs,
                              b.advantages, b.returns, b.values_old, cfg)
    wide = PpoConfig(value_loss_coef=0.0, clip_range=1e9)
    _, grads_unclipped = loss_and_grads(params, b.observations, b.actions,
                                        b.log_probs, b.advantages, b.returns,
                                        b.values_old, wide)
    for k in grads:
        assert np.allclose(grads[k], grads_unclipped[k], atol=1e-12)


# -- ppo_update -----------------------------------------------------------


def test_high_entropy_coef_raises_post_update_entropy():
    rng = np.random.default_rng(6)
    b = random_batch(rng, n=64)
    results = {}
    for coef in (0.0, 10.0):
        params = small_params(seed=7)
        params["Wp"] *= 300.0  # start from a sharply non-uniform policy
        optim = nets.AdamState.for_params(params)
        cfg = PpoConfig(entropy_coef=coef, epochs=1, minibatches=1,
                        learning_rate=1e-2)
        for _ in range(20):
            ppo_update(params, optim, b, cfg, np.random.default_rng(0))
        logits, _ = nets.forward(params, b.observations)
        results[coef] = policy_entropy(logits).mean()
    assert results[10.0] > results[0.0]


def test_distill_target_equal_to_self_matches_no_distill():
    rng = np.random.default_rng(8)
    b = random_batch(rng, n=16)
    outs = []
    for distill in (None, "self"):
        params = small_params(seed=9)
        optim = nets.AdamState.for_params(params)
        # single gradient step: the self-KL has zero value and zero gradient
        cfg = PpoConfig(epochs=1, minibatches=1, learning_rate=1e-3)
        d = None
        if distill == "self":
            d = ({k: v.copy() for k, v in params.items()},
                 DistillConfig(kl_coef=5.0, kl_interval=1))
        ppo_update(params, optim, b, cfg, np.random.default_rng(3), distill=d)
        outs.append(params)
    for k in outs[0]:
        assert np.abs(outs[0][k] - outs[1][k]).max() < 1e-10


def test_distill_schedule_counts_every_mth_minibatch():
    rng = np.random.default_rng(10)
    params = small_params(seed=11)
    optim = nets.AdamState.for_params(params)
    target = small_params(seed=12)
    cfg = PpoConfig(epochs=5, minibatches=4, learning_rate=1e-4)
    total_updates = 0
    total_kl = 0
    for _ in range(3):
        rep = ppo_update(params, optim, random_batch(rng, n=32), cfg,
                         np.random.default_rng(0),
                         distill=(target, DistillConfig(kl_interval=3)))
        total_updates += rep.n_updates
        total_kl += rep.n_kl_updates
    assert total_updates == 60
    assert total_kl == total_updates // 3


def test_distill_direction_off_disables_kl():
    rng = np.random.default_rng(13)
    params = small_params(seed=13)
    optim = nets.AdamState.for_params(params)
    rep = ppo_update(params, optim, random_batch(rng), PpoConfig(),
                     np.random.default_rng(0),
                     distill=(small_params(seed=14),
                              DistillConfig(kl_interval=1, direction="off")))
    assert rep.n_kl_updates == 0


def test_nonfinite_loss_aborts_with_term_name():
    rng = np.random.default_rng(14)
    params = small_params(seed=15)
    b = random_batch(rng)
    b.returns[0] = np.nan
    with pytest.raises(PpoUpdateError, match="value_loss"):
        ppo_update(params, nets.AdamState.for_params(params), b, PpoConfig(),
                   np.random.default_rng(0))


def test_config_validation():
    with pytest.raises(ValueError):
        PpoConfig(gamma=1.5)
    with pytest.raises(ValueError):
        PpoConfig(clip_range=0.0)
    with pytest.raises(ValueError):
        DistillConfig(kl_interval=0)
    with pytest.raises(ValueError):
        DistillConfig(direction="sideways")


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=40),
       st.floats(0, 1), st.floats(0, 1), st.booleans())
def test_gae_property_matches_oracle(rewards, g, l, terminal):
    values = np.linspace(-1, 1, len(rewards) + 1)
    fast = gae(rewards, values, terminal, g, l)
    slow = oracle.brute_force_gae(rewards, values, terminal, g, l)
    assert np.abs(fast[0] - slow[0]).max() < 1e-10
