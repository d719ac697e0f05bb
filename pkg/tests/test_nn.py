import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from cyberweak.nn import (
    OptimizerState,
    ParamSet,
    PolicyNet,
    QNet,
    ShapeError,
    actor_gradient,
    critic_loss,
    expected_actor_gradient,
    grad_check,
    load_checkpoint,
    optimizer_step,
    policy_forward,
    q_all_actions,
    q_forward,
    save_checkpoint,
    soft_update,
)

D, K, U, W, M = 6, 4, 5, 7, 3


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def nets(rng):
    policy = PolicyNet(D, K, rng, gru_units=U, hidden=W)
    # nonzero GRU biases so their gradients are exercised too
    for b in ("br", "bz", "bn"):
        policy.params[b] = rng.normal(0, 0.3, U)
    qnet = QNet(D, K, rng, hidden=W)
    x = rng.normal(size=(M, D))
    h = rng.normal(0, 0.5, size=(M, U))
    return policy, qnet, x, h


def test_small_nets_fit_the_budget(nets):
    policy, qnet, _, _ = nets
    assert policy.params.size + qnet.params.size <= 5000


def test_paramset_views_share_storage():
    p = ParamSet({"a": (2, 3), "b": (4,)})
    assert p.size == 10 and list(p) == ["a", "b"]
    p["b"] = np.arange(4.0)
    assert np.array_equal(p.flat[6:], np.arange(4.0))
    q = p.copy()
    q["a"][0, 0] = 9.0
    assert p["a"][0, 0] == 0.0
    with pytest.raises(ShapeError):
        p["a"] = np.zeros(5)


def test_critic_gradient(nets, rng):
    _, qnet, x, _ = nets
    a = rng.random((M, K))
    y = rng.normal(size=M)
    _, grads = critic_loss(qnet, x, a, y)
    report = grad_check(lambda: critic_loss(qnet, x, a, y)[0], qnet.params, grads)
    assert report.passed, report


def test_actor_gradient(nets):
    policy, qnet, x, h = nets
    _, grads = actor_gradient(policy, qnet, x, h)
    report = grad_check(lambda: actor_gradient(policy, qnet, x, h)[0], policy.params, grads)
    assert report.passed, report


@pytest.mark.parametrize("use_mask", [False, True])
def test_expected_actor_gradient(nets, use_mask):
    policy, qnet, x, h = nets
    mask = np.array([[1, 0, 1, 1], [0, 1, 0, 0], [1, 1, 1, 1]], bool) if use_mask else None

    def loss():
        return expected_actor_gradient(policy, qnet, x, h, 0.5, 1e-2, mask)[0]

    _, grads = expected_actor_gradient(policy, qnet, x, h, 0.5, 1e-2, mask)
    report = grad_check(loss, policy.params, grads)
    assert report.passed, report


def test_gru_cell_gradient_including_hidden_input(nets, rng):
    policy, _, x, h = nets
    w = rng.normal(size=(M, K))

    def loss():
        out, _, _ = policy.forward(x, h)
        return float((w * out).sum())

    _, _, cache = policy.forward(x, h)
    grads, dh = policy.backward(cache, w)
    report = grad_check(loss, policy.params, grads)
    assert report.passed, report
    hp = ParamSet({"h": h.shape}, h.reshape(-1).copy())
    hp_grads = ParamSet({"h": h.shape}, dh.reshape(-1).copy())

    def loss_h():
        out, _, _ = policy.forward(x, hp["h"])
        return float((w * out).sum())

    assert grad_check(loss_h, hp, hp_grads).passed


def test_linear_model_check_is_sharp(rng):
    x, y = rng.normal(size=(8, 3)), rng.normal(size=(8, 2))
    p = ParamSet({"W": (3, 2)})
    p["W"] = rng.normal(size=(3, 2))

    def loss():
        r = x @ p["W"] - y
        return float((r * r).mean())

    g = ParamSet({"W": (3, 2)})
    g["W"] = 2.0 * x.T @ (x @ p["W"] - y) / y.size
    report = grad_check(loss, p, g)
    assert report.max_rel_error < 1e-8


def test_corrupted_gradient_is_caught(nets, rng):
    _, qnet, x, _ = nets
    a, y = rng.random((M, K)), rng.normal(size=M)
    _, grads = critic_loss(qnet, x, a, y)
    grads.flat[...] *= 1.1
    assert not grad_check(lambda: critic_loss(qnet, x, a, y)[0], qnet.params, grads).passed


def test_zero_weights(rng):
    policy = PolicyNet(D, K, rng, U, W)
    policy.params.flat[...] = 0.0
    out, h2 = policy_forward(policy, np.zeros(D), policy.initial_hidden())
    assert np.array_equal(out, np.full(K, 0.5))
    assert np.array_equal(h2, np.zeros(U))
    qnet = QNet(D, K, rng, W)
    qnet.params.flat[...] = 0.0
    assert q_forward(qnet, np.zeros(D), np.zeros(K)) == 0.0


def test_dead_relu_returns_output_bias(nets, rng):
    _, qnet, x, _ = nets
    qnet.params["b1"] = -1e6
    qnet.params["b2"] = -1.0
    q = q_forward(qnet, x, rng.random((M, K)))
    assert np.array_equal(q, np.full(M, qnet.params["b3"][0]))


def test_forward_is_deterministic_and_bounded(nets):
    policy, qnet, x, h = nets
    a1, h1 = policy_forward(policy, x[0], h[0])
    a2, h2 = policy_forward(policy, x[0], h[0])
    assert np.array_equal(a1, a2) and np.array_equal(h1, h2)
    assert np.all((a1 > 0) & (a1 < 1))
    batched = q_forward(qnet, x, np.tile(a1, (M, 1)))
    single = [q_forward(qnet, x[j], a1) for j in range(M)]
    assert np.allclose(batched, single, rtol=0, atol=1e-12)


def test_q_all_actions_matches_one_hot_forward(nets):
    _, qnet, x, _ = nets
    table = q_all_actions(qnet, x)
    for k in range(K):
        onehot = np.zeros((M, K))
        onehot[:, k] = 1.0
        assert np.allclose(table[:, k], q_forward(qnet, x, onehot), atol=1e-12)


def test_critic_loss_values(rng):
    qnet = QNet(D, K, rng, W)
    qnet.params.flat[...] = 0.0
    loss, _ = critic_loss(qnet, np.zeros((1, D)), np.zeros((1, K)), np.array([2.0]))
    assert loss == 4.0
    q2 = QNet(D, K, rng, W)
    x, a = rng.normal(size=(M, D)), rng.random((M, K))
    loss, grads = critic_loss(q2, x, a, q_forward(q2, x, a))
    assert loss == 0.0 and not grads.flat.any()


def test_actor_gradient_zero_when_critic_ignores_action(nets):
    policy, qnet, x, h = nets
    qnet.params["W1"][D:] = 0.0
    _, grads = actor_gradient(policy, qnet, x, h)
    assert not grads.flat.any()


def test_actor_gradient_mean_invariance(nets):
    policy, qnet, x, h = nets
    _, g1 = actor_gradient(policy, qnet, x, h)
    _, g2 = actor_gradient(policy, qnet, np.vstack([x, x]), np.vstack([h, h]))
    assert np.allclose(g1.flat, g2.flat, rtol=1e-12, atol=1e-15)


def test_shape_errors(nets):
    policy, qnet, x, h = nets
    with pytest.raises(ShapeError):
        policy_forward(policy, np.zeros(D + 1), policy.initial_hidden())
    with pytest.raises(ShapeError):
        q_forward(qnet, x, np.zeros((M, K + 2)))
    with pytest.raises(ShapeError):
        critic_loss(qnet, x, np.zeros((M, K)), np.zeros(M + 1))
    with pytest.raises(ShapeError):
        soft_update(qnet.params.copy(), policy.params, 0.5)
    with pytest.raises(ShapeError):
        optimizer_step(qnet.params, policy.params.zeros_like(), OptimizerState.for_params(qnet.params, 1e-3))


# ---------------------------------------------------------------------------
# soft target updates

TAUS = st.sampled_from([0.0, 0.01, 0.1, 1.0])
ARRAYS = hnp.arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e6, 1e6, allow_nan=False))


@settings(max_examples=200, deadline=None)
@given(data=st.data(), tau=TAUS)
def test_soft_update_within_one_ulp(data, tau):
    online_vals = data.draw(ARRAYS)
    target_vals = data.draw(hnp.arrays(np.float64, online_vals.shape,
                                       elements=st.floats(-1e6, 1e6, allow_nan=False)))
    online = ParamSet({"w": online_vals.shape}, online_vals.copy())
    target = ParamSet({"w": online_vals.shape}, target_vals.copy())
    soft_update(target, online, tau)
    for got, o, t in zip(target["w"], online_vals, target_vals):
        want = tau * o + (1.0 - tau) * t
        assert abs(got - want) <= np.spacing(abs(want))


def test_soft_update_examples():
    online = ParamSet({"w": (1,)}, np.array([1.0]))
    target = ParamSet({"w": (1,)}, np.array([0.0]))
    assert soft_update(target, online, 0.01)["w"][0] == 0.01
    before = target.flat.copy()
    soft_update(target, online, 0.0)
    soft_update(target, online, 0.0)
    assert np.array_equal(target.flat, before)
    assert np.array_equal(soft_update(target, online, 1.0).flat, online.flat)


# ---------------------------------------------------------------------------
# Adam


def test_adam_zero_gradient_keeps_params(nets):
    _, qnet, _, _ = nets
    before = qnet.params.flat.copy()
    opt = OptimizerState.for_params(qnet.params, 1e-2)
    for _ in range(5):
        optimizer_step(qnet.params, qnet.params.zeros_like(), opt)
    assert np.array_equal(qnet.params.flat, before)


def test_adam_is_deterministic():
    finals = []
    for _ in range(2):
        rng = np.random.default_rng(3)
        qnet = QNet(D, K, rng, W)
        opt = OptimizerState.for_params(qnet.params, 1e-3)
        for _ in range(20):
            x, a, y = rng.normal(size=(M, D)), rng.random((M, K)), rng.normal(size=M)
            _, g = critic_loss(qnet, x, a, y)
            optimizer_step(qnet.params, g, opt)
        finals.append(qnet.params.flat.copy())
    assert np.array_equal(*finals)


def test_adam_fits_tiny_regression():
    rng = np.random.default_rng(0)
    qnet = QNet(D, K, rng, W)
    x, a, y = rng.normal(size=(16, D)), rng.random((16, K)), rng.normal(size=16)
    opt = OptimizerState.for_params(qnet.params, 1e-2)
    losses = []
    for _ in range(100):
        loss, g = critic_loss(qnet, x, a, y)
        losses.append(loss)
        optimizer_step(qnet.params, g, opt)
    assert all(b < a for a, b in zip(losses, losses[1:]))


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip(tmp_path, nets):
    policy, qnet, _, _ = nets
    tensors = {f"actor/{k}": v for k, v in policy.params.items()}
    tensors.update({f"critic/{k}": v for k, v in qnet.params.items()})
    path = tmp_path / "ck.bin"
    save_checkpoint(str(path), tensors)
    back = load_checkpoint(str(path))
    assert set(back) == set(tensors)
    for k in tensors:
        assert back[k].shape == tensors[k].shape
        assert np.array_equal(back[k], tensors[k])


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError):
        load_checkpoint(str(path))
