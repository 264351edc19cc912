import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lgnet import network as nn
from lgnet.errors import DimensionMismatch, LengthMismatch


def naive_forward(params, x):
    """Per-sample loop, written independently of the vectorized code."""
    arch = params.arch
    sig = np.tanh if arch.activation is nn.Activation.TANH else (lambda z: 1 / (1 + np.exp(-z)))
    if arch.input_range is not None:
        lo, hi = arch.input_range
        x = 2 * (x - lo) / (hi - lo) - 1
    h = x
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = W @ h + b
        h = sig(z) if l < arch.depth - 1 else z
    if not arch.bounded:
        return h
    C = arch.bound
    return C * np.tanh(h) if arch.activation is nn.Activation.TANH else C * (2 * sig(h) - 1)


archs = st.builds(
    lambda dims, act, per_mode, rng: nn.Architecture(
        tuple(dims),
        act,
        tuple(np.linspace(0.5, 2.0, dims[-1])) if per_mode else 1.5,
        True,
        (0.0, 1.0) if rng else None,
    ),
    st.lists(st.integers(1, 6), min_size=2, max_size=5),
    st.sampled_from(list(nn.Activation)),
    st.booleans(),
    st.booleans(),
)


@given(archs, st.integers(0, 2**31))
def test_forward_matches_naive(arch, seed):
    p = nn.init_params(arch, seed)
    X = np.random.default_rng(seed).uniform(0, 1, (4, arch.dims[0]))
    out = nn.forward_batch(p, X)
    for i in range(4):
        np.testing.assert_allclose(out[i], naive_forward(p, X[i]), rtol=1e-12, atol=1e-14)


@given(archs, st.integers(0, 2**31))
def test_output_bounded(arch, seed):
    p = nn.init_params(arch, seed)
    p = nn.unflatten(10 * nn.flatten(p), arch)
    X = np.random.default_rng(seed).uniform(-5, 5, (20, arch.dims[0]))
    assert np.all(np.abs(nn.forward_batch(p, X)) <= arch.bound + 1e-12)


@given(archs, st.integers(0, 2**31))
def test_backward_matches_finite_differences(arch, seed):
    rng = np.random.default_rng(seed)
    p = nn.init_params(arch, seed)
    X = rng.uniform(0, 1, (3, arch.dims[0]))
    G = rng.standard_normal((3, arch.dims[-1]))
    theta = nn.flatten(p)
    g = nn.flatten(nn.backward(p, X, G))

    def phi(t):
        return float(np.sum(G * nn.forward_batch(nn.unflatten(t, arch), X)))

    h = 1e-6
    idx = rng.choice(theta.size, size=min(15, theta.size), replace=False)
    for i in idx:
        e = np.zeros_like(theta)
        e[i] = h
        fd = (phi(theta + e) - phi(theta - e)) / (2 * h)
        assert fd == pytest.approx(g[i], rel=1e-5, abs=1e-8)


@given(archs, st.integers(0, 2**31))
def test_flatten_roundtrip(arch, seed):
    p = nn.init_params(arch, seed)
    theta = nn.flatten(p)
    assert theta.size == nn.num_params(arch)
    q = nn.unflatten(theta, arch)
    for a, b in zip(p.weights + p.biases, q.weights + q.biases):
        assert np.array_equal(a, b)


def test_unflatten_length_mismatch():
    arch = nn.Architecture((2, 3, 1))
    with pytest.raises(LengthMismatch):
        nn.unflatten(np.zeros(nn.num_params(arch) + 1), arch)


def test_architecture_validation():
    with pytest.raises(ValueError):
        nn.Architecture((4,))
    with pytest.raises(ValueError):
        nn.Architecture((4, 0, 3))
    with pytest.raises(ValueError):
        nn.Architecture((4, 3), C_alpha=0.0)
    with pytest.raises(DimensionMismatch):
        nn.Architecture((4, 3), C_alpha=(1.0, 2.0))
    with pytest.raises(ValueError):
        nn.Architecture((4, 3), input_range=(1.0, 0.0))


def test_params_shape_validation():
    arch = nn.Architecture((2, 3, 1))
    p = nn.zero_params(arch)
    with pytest.raises(DimensionMismatch):
        nn.NetworkParams(arch, p.weights[::-1], p.biases)


def test_input_dimension_checked():
    p = nn.init_params(nn.Architecture((4, 3, 2)), 0)
    with pytest.raises(DimensionMismatch):
        nn.forward_batch(p, np.zeros((1, 3)))
    with pytest.raises(DimensionMismatch):
        nn.forward(p, np.zeros((2, 4)))
    assert nn.forward(p, np.zeros(4)).shape == (2,)


def test_init_is_seeded_glorot():
    arch = nn.Architecture((4, 50, 31))
    a, b = nn.init_params(arch, 3), nn.init_params(arch, 3)
    assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
    assert not np.array_equal(a.weights[0], nn.init_params(arch, 4).weights[0])
    assert np.abs(a.weights[0]).max() <= np.sqrt(6 / 54)
    assert all(np.all(bias == 0) for bias in a.biases)


def test_zero_network_outputs_zero():
    for act in nn.Activation:
        p = nn.zero_params(nn.Architecture((4, 5, 3), act, 2.0))
        np.testing.assert_allclose(nn.forward_batch(p, np.ones((2, 4))), 0.0, atol=1e-15)


def test_widen_preserves_function():
    arch = nn.Architecture((4, 5, 3), input_range=(0.0, 1.0))
    p = nn.init_params(arch, 1)
    p.biases[0][:] = 0.3
    w = nn.widen_hidden(p, 9)
    X = np.random.default_rng(0).uniform(size=(7, 4))
    assert w.arch.dims == (4, 9, 3)
    np.testing.assert_allclose(nn.forward_batch(w, X), nn.forward_batch(p, X), rtol=1e-15)
    with pytest.raises(ValueError):
        nn.widen_hidden(p, 4)


def test_checkpoint_roundtrip(tmp_path):
    arch = nn.Architecture((4, 6, 6, 3), nn.Activation.SIGMOID, (1.0, 2.0, 3.0), True, (0.0, 1.0))
    p = nn.init_params(arch, 5)
    nn.save_checkpoint(tmp_path / "m.ckpt", p, seed=5, note="x")
    q, header = nn.load_checkpoint(tmp_path / "m.ckpt")
    assert q.arch == arch
    assert header["seed"] == 5 and header["note"] == "x"
    assert np.array_equal(nn.flatten(p), nn.flatten(q))


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "bad").write_bytes(b"hello\n")
    with pytest.raises(ValueError):
        nn.load_checkpoint(tmp_path / "bad")


def test_checkpoint_truncated(tmp_path):
    p = nn.init_params(nn.Architecture((2, 3, 1)), 0)
    nn.save_checkpoint(tmp_path / "m.ckpt", p)
    data = (tmp_path / "m.ckpt").read_bytes()
    (tmp_path / "m.ckpt").write_bytes(data[:-8])
    with pytest.raises(LengthMismatch):
        nn.load_checkpoint(tmp_path / "m.ckpt")


def test_outputs_strictly_inside_bound_for_many_draws():
    rng = np.random.default_rng(11)
    count = 0
    for seed in range(100):
        arch = nn.Architecture((4, 16, 31), C_alpha=tuple(rng.uniform(0.01, 1.0, 31)), input_range=(0.0, 1.0))
        p = nn.init_params(arch, seed)
        for W in p.weights:
            W *= rng.uniform(0.5, 3.0)
        out = nn.forward_batch(p, rng.uniform(0, 1, (100, 4)))
        assert np.all(np.abs(out) < arch.bound)
        count += out.shape[0]
    assert count == 10_000
