import math

import numpy as np
import pytest

from fastact import nn
from fastact.errors import ConfigError

F32 = np.float32


def rng(seed=0):
    return np.random.default_rng(seed)


def dense_model(act="tanh", n_in=6, n_out=4, seed=0, counters=None):
    spec = [nn.LayerSpec("dense", {"n_in": n_in, "n_out": n_out}, activation=act)]
    return nn.build_model(spec, rng(seed), counters)


# ---------------------------------------------------------------------------
# forward algebra


def test_dense_linear_forward_matches_matmul():
    model = dense_model(act=None)
    layer = model.layers[0]
    x = rng(1).standard_normal((5, 6)).astype(F32)
    y = model.forward(x)
    assert np.allclose(y, x @ layer.params["W"] + layer.params["b"], atol=1e-6)


def test_dense_backward_input_gradient_is_gW_transpose():
    model = dense_model(act=None)
    layer = model.layers[0]
    x = rng(1).standard_normal((5, 6)).astype(F32)
    g = rng(2).standard_normal((5, 4)).astype(F32)
    model.forward(x)
    gx = model.backward(g)
    assert np.allclose(gx, g @ layer.params["W"].T, atol=1e-6)
    assert np.allclose(layer.grads["W"], x.T @ g, atol=1e-5)
    assert np.allclose(layer.grads["b"], g.sum(axis=0), atol=1e-5)


def test_lstm_zero_weights_emit_zeros():
    # z=0 everywhere: gates sit at 0.5, candidate tanh(0)=0, so the cell and
    # hidden states never leave zero
    counters = {}
    gates = nn.LstmGateConfig("sigm", "tanh")
    model = nn.build_model(
        [nn.LayerSpec("lstm", {"n_in": 3, "n_hidden": 5, "gates": gates})],
        rng(0), counters)
    layer = model.layers[0]
    for key in layer.params:
        layer.params[key][:] = 0.0
    x = rng(3).standard_normal((2, 4, 3)).astype(F32)
    y = model.forward(x)
    assert y.shape == (2, 4, 5)
    assert np.all(y == 0.0)


def test_maxpool_selects_maxima_and_routes_gradient():
    pool = nn.MaxPool(2)
    x = np.arange(16, dtype=F32).reshape(1, 1, 4, 4)
    y = pool.forward(x)
    assert np.array_equal(y[0, 0], [[5.0, 7.0], [13.0, 15.0]])
    g = np.ones_like(y)
    gx = pool.backward(g)
    assert gx.sum() == 4.0
    assert gx[0, 0, 1, 1] == 1.0 and gx[0, 0, 0, 0] == 0.0


def test_maxpool_rejects_other_kernels():
    with pytest.raises(ConfigError):
        nn.MaxPool(3)


def test_flatten_roundtrip():
    fl = nn.Flatten()
    x = rng(0).standard_normal((3, 2, 4, 4)).astype(F32)
    y = fl.forward(x)
    assert y.shape == (3, 32)
    assert np.array_equal(fl.backward(y), x)


# ---------------------------------------------------------------------------
# gradients vs finite differences

# The engine runs in f32, so probes must be coarse enough that the honest
# forward-difference signal dominates rounding: central h=1e-2 on unit-scale
# params gives ~1e-5 FD truncation error against ~1e-6 f32 noise.
_H = 1e-2
_RTOL = 2e-2
_ATOL = 1e-4


def _fd_param_check(model, x, target, n_probes=12, seed=9):
    """Spot-check analytic parameter gradients of the mse objective."""
    out = model.forward(x)
    _, grad = nn.mse_loss(out, target)
    model.backward(grad)
    probe_rng = np.random.default_rng(seed)
    checked = 0
    for key, p, g in model.param_items():
        if g is None or p.size == 0:
            continue
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for idx in probe_rng.choice(p.size, size=min(n_probes, p.size),
                                    replace=False):
            orig = flat_p[idx]
            flat_p[idx] = orig + _H
            lp, _ = nn.mse_loss(model.forward(x), target)
            flat_p[idx] = orig - _H
            lm, _ = nn.mse_loss(model.forward(x), target)
            flat_p[idx] = orig
            fd = (lp - lm) / (2 * _H)
            assert abs(flat_g[idx] - fd) <= _ATOL + _RTOL * abs(fd), (
                f"{key}[{idx}]: analytic {flat_g[idx]} vs fd {fd}")
            checked += 1
    assert checked > 0


def test_dense_param_gradients_match_fd():
    model = dense_model(act="tanh", n_in=5, n_out=3, seed=2)
    x = rng(4).uniform(-1, 1, size=(8, 5)).astype(F32)
    t = rng(5).uniform(-1, 1, size=(8, 3)).astype(F32)
    _fd_param_check(model, x, t)


def test_conv_param_gradients_match_fd():
    spec = [
        nn.LayerSpec("conv2d", {"in_ch": 1, "out_ch": 2, "k": 3}, activation="serp"),
        nn.LayerSpec("flatten"),
        nn.LayerSpec("dense", {"n_in": 2 * 36, "n_out": 3}, activation=None),
    ]
    model = nn.build_model(spec, rng(3))
    x = rng(6).uniform(0, 1, size=(4, 1, 8, 8)).astype(F32)
    t = rng(7).uniform(-1, 1, size=(4, 3)).astype(F32)
    _fd_param_check(model, x, t, n_probes=6)


def test_maxpool_path_gradients_match_fd():
    # inputs spaced out so +-h probes never flip an argmax
    spec = [
        nn.LayerSpec("maxpool"),
        nn.LayerSpec("flatten"),
        nn.LayerSpec("dense", {"n_in": 4, "n_out": 2}, activation="sigm"),
    ]
    model = nn.build_model(spec, rng(4))
    x = (np.arange(32, dtype=F32).reshape(2, 1, 4, 4)) * 0.37
    t = rng(8).uniform(0, 1, size=(2, 2)).astype(F32)
    _fd_param_check(model, x, t)


def test_lstm_param_gradients_match_fd():
    gates = nn.LstmGateConfig("sigm", "tanh")
    spec = [
        nn.LayerSpec("lstm", {"n_in": 3, "n_hidden": 4, "gates": gates}),
        nn.LayerSpec("dense", {"n_in": 4, "n_out": 3}, activation=None),
    ]
    model = nn.build_model(spec, rng(5))
    x = rng(9).uniform(-1, 1, size=(2, 6, 3)).astype(F32)
    t = rng(10).uniform(-1, 1, size=(2, 6, 3)).astype(F32)
    _fd_param_check(model, x, t, n_probes=8)


def test_lstm_input_gradient_matches_fd():
    gates = nn.LstmGateConfig("sigm", "tanh")
    model = nn.build_model(
        [nn.LayerSpec("lstm", {"n_in": 2, "n_hidden": 3, "gates": gates})],
        rng(6))
    x = rng(11).uniform(-1, 1, size=(1, 5, 2)).astype(F32)
    t = rng(12).uniform(-1, 1, size=(1, 5, 3)).astype(F32)
    out = model.forward(x)
    _, grad = nn.mse_loss(out, t)
    gx = model.backward(grad)
    probe_rng = np.random.default_rng(13)
    flat = x.reshape(-1)
    for idx in probe_rng.choice(flat.size, size=6, replace=False):
        orig = flat[idx]
        flat[idx] = orig + _H
        lp, _ = nn.mse_loss(model.forward(x), t)
        flat[idx] = orig - _H
        lm, _ = nn.mse_loss(model.forward(x), t)
        flat[idx] = orig
        fd = (lp - lm) / (2 * _H)
        assert abs(gx.reshape(-1)[idx] - fd) <= _ATOL + _RTOL * abs(fd)


# ---------------------------------------------------------------------------
# losses


def test_mse_loss_example():
    out = np.array([[1.0, 2.0]], dtype=F32)
    target = np.zeros((1, 2), dtype=F32)
    loss, grad = nn.mse_loss(out, target)
    assert loss == 5.0
    assert np.array_equal(grad, np.array([[2.0, 4.0]], dtype=F32))
    assert grad.dtype == F32


def test_mse_loss_means_over_batch():
    out = np.ones((4, 3), dtype=F32)
    target = np.zeros((4, 3), dtype=F32)
    loss, _ = nn.mse_loss(out, target)
    assert loss == pytest.approx(3.0)


def test_softmax_cross_entropy_matches_manual():
    logits = np.array([[2.0, 1.0, 0.1], [0.0, 0.0, 0.0]], dtype=F32)
    labels = np.array([0, 2])
    loss, grad = nn.softmax_cross_entropy(logits, labels)
    z = logits.astype(np.float64)
    p = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    expect = -(math.log(p[0, 0]) + math.log(p[1, 2])) / 2
    assert loss == pytest.approx(expect, rel=1e-5)
    manual = p.copy()
    manual[0, 0] -= 1
    manual[1, 2] -= 1
    manual /= 2
    assert np.allclose(grad, manual, atol=1e-6)
    # each row's gradient sums to zero: probabilities minus a one-hot
    assert np.allclose(grad.sum(axis=1), 0.0, atol=1e-6)


def test_softmax_cross_entropy_flattens_time_axis():
    logits = rng(0).standard_normal((2, 5, 7)).astype(F32)
    labels = rng(1).integers(0, 7, size=(2, 5))
    loss, grad = nn.softmax_cross_entropy(logits, labels)
    assert grad.shape == logits.shape
    assert math.isfinite(loss)


# ---------------------------------------------------------------------------
# divergence plumbing


def test_assert_finite_catches_inf_and_nan():
    with pytest.raises(nn.DivergenceSignal) as ei:
        nn._assert_finite(np.array([1.0, np.inf], dtype=F32), 3, "forward")
    assert ei.value.layer == 3
    assert ei.value.phase == "forward"
    nn._assert_finite(np.full(1000, 3e38, dtype=F32), 0, "forward")  # finite, huge


def test_nan_probe_reports_failing_layer_index():
    spec = [
        nn.LayerSpec("dense", {"n_in": 4, "n_out": 4}, activation="tanh"),
        nn.LayerSpec("dense", {"n_in": 4, "n_out": 2}, activation="nan_probe"),
    ]
    model = nn.build_model(spec, rng(0))
    with pytest.raises(nn.DivergenceSignal) as ei:
        model.forward(np.ones((3, 4), dtype=F32))
    assert ei.value.layer == 1


def test_train_turns_nan_into_status():
    model = dense_model(act="nan_probe", n_in=3, n_out=2)
    x = np.ones((4, 3), dtype=F32)
    y = np.zeros((4, 2), dtype=F32)
    trace = nn.train(model, lambda e: [(x, y)],
                     nn.TrainConfig(epochs=3, loss="mse"))
    assert trace.status == "nan"
    assert trace.layer == 0
    assert trace.final_loss is None
    assert len(trace.epoch_losses) < 3  # loop stops at the failure


def test_train_divergence_threshold():
    model = dense_model(act=None, n_in=3, n_out=2)
    x = np.full((2, 3), 50.0, dtype=F32)
    y = np.zeros((2, 2), dtype=F32)
    trace = nn.train(model, lambda e: [(x, y)],
                     nn.TrainConfig(epochs=2, loss="mse",
                                    divergence_threshold=1e-6))
    assert trace.status == "diverged"
    assert trace.layer is None


# ---------------------------------------------------------------------------
# training loop behavior


def _toy_batches(seed=0, n=32, n_in=5, n_out=3):
    r = np.random.default_rng(seed)
    x = r.uniform(-1, 1, size=(n, n_in)).astype(F32)
    y = r.uniform(-1, 1, size=(n, n_out)).astype(F32)
    return lambda epoch: [(x[:16], y[:16]), (x[16:], y[16:])]


def test_sgd_zero_lr_freezes_loss():
    model = dense_model(act="tanh", n_in=5, n_out=3)
    cfg = nn.TrainConfig(epochs=4, optimizer="sgd", lr=0.0, loss="mse")
    trace = nn.train(model, _toy_batches(), cfg)
    assert trace.status == "converged"
    assert len(set(trace.epoch_losses)) == 1


def test_training_reduces_loss():
    model = dense_model(act="tanh", n_in=5, n_out=3)
    cfg = nn.TrainConfig(epochs=10, loss="mse", lr=1e-2)
    trace = nn.train(model, _toy_batches(), cfg)
    assert trace.status == "converged"
    assert trace.epoch_losses[-1] < trace.epoch_losses[0]
    assert trace.final_loss == trace.epoch_losses[-1]


def test_train_bitwise_deterministic():
    def run():
        model = dense_model(act="sigm", n_in=5, n_out=3, seed=7)
        cfg = nn.TrainConfig(epochs=3, loss="mse")
        return nn.train(model, _toy_batches(1), cfg)

    a, b = run(), run()
    assert a.epoch_losses == b.epoch_losses  # float equality, not approx


def test_equivalent_activations_trace_identically():
    # same algebra in a different spelling: bit-identical f32 forward values
    # keep the whole optimization trajectory identical
    def run(act):
        model = dense_model(act=act, n_in=5, n_out=3, seed=7)
        cfg = nn.TrainConfig(epochs=3, loss="mse")
        return nn.train(model, _toy_batches(1), cfg)

    assert run("relu").epoch_losses == run("relu_sum").epoch_losses


def test_counters_count_forward_elements():
    counters = {}
    model = dense_model(act="tanh", n_in=6, n_out=4, counters=counters)
    model.forward(np.zeros((5, 6), dtype=F32))
    assert counters == {"act": 20}
    model.forward(np.zeros((2, 6), dtype=F32))
    assert counters == {"act": 28}


def test_trace_records_shape():
    trace = nn.TrainTrace([1.0, 0.5], [0.1, 0.2], "converged", None, 0.25, 0.5)
    recs = trace.records()
    assert recs[0] == {"epoch": 0, "loss": 1.0, "cumulative_seconds": 0.1}
    assert recs[-1] == {"status": "converged", "final_loss": 0.5,
                        "total_seconds": 0.25}
    bare = trace.records(omit_timing=True)
    assert bare[0] == {"epoch": 0, "loss": 1.0}
    assert "total_seconds" not in bare[-1]


def test_param_items_ordering():
    spec = [
        nn.LayerSpec("dense", {"n_in": 2, "n_out": 2}, activation=None),
        nn.LayerSpec("dense", {"n_in": 2, "n_out": 2}, activation=None),
    ]
    model = nn.build_model(spec, rng(0))
    keys = [k for k, _, _ in model.param_items()]
    assert keys == ["0.W", "0.b", "1.W", "1.b"]


def test_build_model_rejects_unknown_layer():
    with pytest.raises(ConfigError, match="spline"):
        nn.build_model([nn.LayerSpec("spline")], rng(0))


# ---------------------------------------------------------------------------
# optimizers


def test_adam_matches_reference_updates():
    # one scalar parameter against the textbook update in f64
    p = np.array([0.5], dtype=F32)
    grads = [np.array([g], dtype=F32) for g in (0.3, -0.1, 0.25, 0.0, 0.9)]
    opt = nn.Adam(lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8)

    ref_p, m, v = 0.5, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        opt.step([("p", p, g)], t)
        gf = float(g[0])
        m = 0.9 * m + 0.1 * gf
        v = 0.999 * v + 0.001 * gf * gf
        mhat = m / (1 - 0.9 ** t)
        vhat = v / (1 - 0.999 ** t)
        ref_p -= 1e-2 * mhat / (math.sqrt(vhat) + 1e-8)
        assert p[0] == pytest.approx(ref_p, rel=1e-5, abs=1e-7)


def test_sgd_step():
    p = np.array([1.0, 2.0], dtype=F32)
    nn.Sgd(0.5).step([("p", p, np.array([0.2, -0.4], dtype=F32))], 1)
    assert np.allclose(p, [0.9, 2.2])


def test_optimizers_skip_gradless_params():
    p = np.array([1.0], dtype=F32)
    nn.Adam(1e-2, 0.9, 0.999, 1e-8).step([("p", p, None)], 1)
    nn.Sgd(0.5).step([("p", p, None)], 1)
    assert p[0] == 1.0


# ---------------------------------------------------------------------------
# config validation


@pytest.mark.parametrize("kwargs", [
    {"epochs": 0},
    {"epochs": 1, "loss": "hinge"},
    {"epochs": 1, "optimizer": "rmsprop"},
])
def test_train_config_rejects(kwargs):
    with pytest.raises(ConfigError):
        nn.TrainConfig(**kwargs)


# ---------------------------------------------------------------------------
# inference timing


def test_infer_benchmark_counts_and_cycles():
    model = dense_model(act="tanh", n_in=4, n_out=2)
    inputs = [np.zeros((1, 4), dtype=F32), np.ones((1, 4), dtype=F32)]
    stats = nn.infer_benchmark(model, inputs, repeat=5)
    assert stats.n_samples == 5
    assert stats.total_seconds == pytest.approx(sum(stats.per_inference_seconds))
    assert stats.mean_seconds == pytest.approx(stats.total_seconds / 5)
    assert all(t >= 0 for t in stats.per_inference_seconds)


def test_infer_benchmark_zero_and_negative():
    model = dense_model(act=None, n_in=2, n_out=2)
    stats = nn.infer_benchmark(model, [np.zeros((1, 2), dtype=F32)], repeat=0)
    assert stats.n_samples == 0 and stats.total_seconds == 0.0
    with pytest.raises(ConfigError):
        nn.infer_benchmark(model, [np.zeros((1, 2), dtype=F32)], repeat=-1)
