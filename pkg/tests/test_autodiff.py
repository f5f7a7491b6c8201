import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chtsurrogate.autodiff import (
    BatchNorm2d,
    Conv2d,
    Parameter,
    Tape,
    Tensor,
    batch_norm,
    concat_channels,
    conv2d,
    conv_transpose2d,
    dropout,
    load_checkpoint,
    mul,
    no_grad,
    relu,
    save_checkpoint,
    set_debug,
)
from chtsurrogate.autodiff import functional as F
from chtsurrogate.autodiff.layers import Module
from gradcheck import numeric_grad, rel_error


def t64(a, grad=True):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=grad)


class TestTensor:
    def test_shape_and_dtype(self):
        x = Tensor(np.zeros((2, 3, 4, 5), np.float32))
        assert x.shape == (2, 3, 4, 5) and x.dtype == np.float32
        assert x.size == 120

    def test_integer_input_promoted_to_float(self):
        assert Tensor([1, 2, 3]).dtype == np.float64

    def test_sum_gradient_is_ones(self, rng):
        x = t64(rng.normal(size=(3, 4)))
        F.sum(x).backward()
        np.testing.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_quadratic_gradient(self, rng):
        x = t64(rng.normal(size=(5,)))
        F.sum(mul(x, x)).backward()
        np.testing.assert_allclose(x.grad, 2 * x.data)

    def test_accumulates_over_multiple_uses(self, rng):
        x = t64(rng.normal(size=(4,)))
        y = F.add(x, mul(x, 3.0))
        F.sum(y).backward()
        np.testing.assert_allclose(x.grad, np.full(4, 4.0))

    def test_grad_has_data_shape(self, rng):
        x = t64(rng.normal(size=(2, 1, 3, 3)))
        F.sum(F.square(x)).backward()
        assert x.grad.shape == x.shape

    def test_backward_non_scalar_errors(self):
        with pytest.raises(ValueError):
            t64(np.ones(3)).backward()

    def test_backward_without_tape_errors(self):
        with pytest.raises(RuntimeError):
            Tensor(np.ones(())).backward()

    def test_second_backward_errors(self, rng):
        x = t64(rng.normal(size=(3,)))
        loss = F.sum(F.square(x))
        loss.backward()
        with pytest.raises(RuntimeError):
            loss.backward()

    def test_no_grad_records_nothing(self, rng):
        x = t64(rng.normal(size=(3,)))
        with no_grad():
            y = F.square(x)
        assert not y.requires_grad and y.is_leaf

    def test_tape_is_topological(self, rng):
        x = t64(rng.normal(size=(1, 2, 5, 5)))
        k = t64(rng.normal(size=(3, 2, 3, 3)))
        y = relu(conv2d(x, k, padding=1))
        loss = F.sum(mul(y, y))
        tape = Tape.record(loss)
        assert tape.is_topological()
        assert [e[2] for e in tape.entries] == ["conv2d", "relu", "mul", "sum"]

    def test_debug_mode_flags_nan(self):
        prev = set_debug(True)
        try:
            with pytest.raises(FloatingPointError), np.errstate(invalid="ignore"):
                mul(t64([np.inf]), 0.0)
        finally:
            set_debug(prev)

    def test_release_mode_propagates_nan(self):
        prev = set_debug(False)
        try:
            with np.errstate(invalid="ignore"):
                out = mul(t64([np.inf]), 0.0)
            assert np.isnan(out.data[0])
        finally:
            set_debug(prev)

    def test_broadcast_mul_gradients(self, rng):
        a = t64(rng.normal(size=(2, 3, 4, 4)))
        m = t64(rng.normal(size=(2, 1, 4, 4)))
        F.sum(mul(a, m)).backward()
        np.testing.assert_allclose(a.grad, np.broadcast_to(m.data, a.shape))
        np.testing.assert_allclose(m.grad, a.data.sum(axis=1, keepdims=True))

    def test_incompatible_shapes_error(self):
        with pytest.raises(ValueError):
            F.add(t64(np.ones((2, 3))), t64(np.ones((2, 4))))


class TestConv2d:
    def test_identity_kernel(self, rng):
        x = Tensor(rng.normal(size=(2, 1, 6, 7)))
        out = conv2d(x, Tensor(np.ones((1, 1, 1, 1))))
        np.testing.assert_array_equal(out.data, x.data)

    def test_all_ones_hand_sum(self):
        out = conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))), padding=1)
        np.testing.assert_array_equal(out.data[0, 0], [[4, 6, 4], [6, 9, 6], [4, 6, 4]])

    def test_initial_conv_shape(self):
        x = Tensor(np.zeros((1, 1, 190, 100), np.float32))
        out = conv2d(x, Tensor(np.zeros((16, 1, 7, 7), np.float32)), stride=2, padding=3)
        assert out.shape == (1, 16, 95, 50)

    def test_matches_direct_loop(self, rng):
        x = rng.normal(size=(2, 3, 7, 6))
        k = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        out = conv2d(Tensor(x), Tensor(k), Tensor(b), stride=2, padding=1).data
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        ref = np.zeros_like(out)
        for i in range(out.shape[2]):
            for j in range(out.shape[3]):
                patch = xp[:, :, 2 * i:2 * i + 3, 2 * j:2 * j + 3]
                ref[:, :, i, j] = np.einsum("nckl,fckl->nf", patch, k) + b
        np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(ValueError):
            conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))

    def test_non_positive_extent(self):
        with pytest.raises(ValueError):
            conv2d(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 5, 5))))

    @pytest.mark.parametrize("seed", range(3))
    @pytest.mark.parametrize("k,stride,pad", [(3, 1, 1), (3, 2, 1), (1, 1, 0), (7, 2, 3)])
    def test_gradients(self, seed, k, stride, pad):
        r = np.random.default_rng(seed)
        x = t64(r.normal(size=(2, 3, 9, 8)))
        w = t64(r.normal(size=(4, 3, k, k)))
        b = t64(r.normal(size=4))
        proj = r.normal(size=conv2d(x, w, b, stride, pad).shape)

        def f():
            return float(np.sum(conv2d(x, w, b, stride, pad).data * proj))

        F.sum(mul(conv2d(x, w, b, stride, pad), proj)).backward()
        for t in (x, w, b):
            assert rel_error(t.grad, numeric_grad(f, t.data)) < 1e-4


class TestConvTranspose2d:
    @pytest.mark.parametrize("h,op,expected", [(13, 0, 25), (24, 1, 48), (1, 1, 2), (1, 0, 1)])
    def test_size_formula(self, h, op, expected):
        x = Tensor(np.zeros((1, 2, h, h)))
        out = conv_transpose2d(x, Tensor(np.zeros((2, 1, 3, 3))), stride=2, padding=1, output_padding=op)
        assert out.shape[2:] == (expected, expected)

    def test_output_padding_must_be_below_stride(self):
        with pytest.raises(ValueError):
            conv_transpose2d(Tensor(np.zeros((1, 1, 3, 3))), Tensor(np.zeros((1, 1, 3, 3))),
                             stride=2, padding=1, output_padding=2)

    def test_per_axis_output_padding(self):
        out = conv_transpose2d(Tensor(np.zeros((1, 1, 48, 25))), Tensor(np.zeros((1, 1, 3, 3))),
                               stride=2, padding=1, output_padding=(1, 0))
        assert out.shape == (1, 1, 96, 49)

    @pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1), (2, 0), (3, 1)])
    def test_adjoint_identity(self, rng, stride, pad):
        x = rng.normal(size=(2, 3, 5, 5))
        k = rng.normal(size=(4, 3, 3, 3))
        y_shape = conv2d(Tensor(x), Tensor(k), stride=stride, padding=pad).shape
        y = rng.normal(size=y_shape)
        lhs = np.sum(conv2d(Tensor(x), Tensor(k), stride=stride, padding=pad).data * y)
        # rows the strided forward never reads come back through output_padding
        op = 5 - ((y_shape[2] - 1) * stride - 2 * pad + 3)
        back = conv_transpose2d(Tensor(y), Tensor(k), stride=stride, padding=pad, output_padding=op)
        assert back.shape == x.shape
        assert abs(lhs - np.sum(x * back.data)) <= 1e-10 * max(1.0, abs(lhs))

    @pytest.mark.parametrize("seed", range(3))
    @pytest.mark.parametrize("op", [(0, 0), (1, 0), (1, 1)])
    def test_gradients(self, seed, op):
        r = np.random.default_rng(seed)
        x = t64(r.normal(size=(2, 3, 5, 4)))
        w = t64(r.normal(size=(3, 2, 3, 3)))
        b = t64(r.normal(size=2))
        proj = r.normal(size=conv_transpose2d(x, w, b, 2, 1, op).shape)

        def f():
            return float(np.sum(conv_transpose2d(x, w, b, 2, 1, op).data * proj))

        F.sum(mul(conv_transpose2d(x, w, b, 2, 1, op), proj)).backward()
        for t in (x, w, b):
            assert rel_error(t.grad, numeric_grad(f, t.data)) < 1e-4


class TestBatchNorm:
    def _stats(self, c, dtype=np.float64):
        return np.zeros(c, dtype), np.ones(c, dtype)

    def test_fixed_point_on_standardized_input(self, rng):
        x = rng.normal(size=(4, 2, 6, 6))
        x = (x - x.mean(axis=(0, 2, 3), keepdims=True)) / x.std(axis=(0, 2, 3), keepdims=True)
        rm, rv = self._stats(2)
        out = batch_norm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), rm, rv, True, 1e-5, 0.1)
        np.testing.assert_allclose(out.data, x / np.sqrt(1 + 1e-5), rtol=1e-12)

    def test_zero_scale_gives_shift(self, rng):
        rm, rv = self._stats(3)
        shift = np.array([0.5, -1.0, 2.0])
        out = batch_norm(Tensor(rng.normal(size=(2, 3, 4, 4))), Tensor(np.zeros(3)), Tensor(shift),
                         rm, rv, True, 1e-5, 0.1)
        np.testing.assert_array_equal(out.data, np.broadcast_to(shift[None, :, None, None], out.shape))

    def test_running_stats_update(self, rng):
        x = rng.normal(loc=2.0, size=(3, 2, 4, 4))
        rm, rv = self._stats(2)
        batch_norm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), rm, rv, True, 1e-5, 0.1)
        np.testing.assert_allclose(rm, 0.1 * x.mean(axis=(0, 2, 3)))
        np.testing.assert_allclose(rv, 0.9 + 0.1 * x.var(axis=(0, 2, 3), ddof=1))

    def test_eval_uses_running_stats(self, rng):
        x = rng.normal(size=(2, 2, 3, 3))
        rm, rv = np.array([1.0, -1.0]), np.array([4.0, 0.25])
        out = batch_norm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), rm, rv, False, 0.0, 0.1)
        ref = (x - rm[None, :, None, None]) / np.sqrt(rv)[None, :, None, None]
        np.testing.assert_allclose(out.data, ref)

    def test_channel_mismatch(self):
        rm, rv = self._stats(3)
        with pytest.raises(ValueError):
            batch_norm(Tensor(np.zeros((1, 2, 2, 2))), Tensor(np.ones(3)), Tensor(np.zeros(3)), rm, rv, True)

    def test_zero_variance_without_eps(self):
        rm, rv = self._stats(1)
        with pytest.raises(FloatingPointError):
            batch_norm(Tensor(np.ones((2, 1, 2, 2))), Tensor(np.ones(1)), Tensor(np.zeros(1)), rm, rv, True, 0.0)

    @pytest.mark.parametrize("training", [True, False])
    @pytest.mark.parametrize("seed", range(3))
    def test_gradients(self, seed, training):
        r = np.random.default_rng(seed)
        x = t64(r.normal(size=(2, 3, 4, 4)))
        g = t64(r.normal(size=3))
        b = t64(r.normal(size=3))
        rm, rv = r.normal(size=3), r.uniform(0.5, 2, size=3)
        proj = r.normal(size=x.shape)

        def run():
            return batch_norm(x, g, b, rm.copy(), rv.copy(), training, 1e-5, 0.1)

        F.sum(mul(run(), proj)).backward()
        for t in (x, g, b):
            assert rel_error(t.grad, numeric_grad(lambda: float(np.sum(run().data * proj)), t.data)) < 1e-4


class TestSmallOps:
    def test_relu_values(self):
        np.testing.assert_array_equal(relu(Tensor([-1.0, 2.0])).data, [0.0, 2.0])

    @pytest.mark.parametrize("training", [True, False])
    def test_dropout_zero_rate_is_identity(self, rng, training):
        x = Tensor(rng.normal(size=(2, 3)))
        assert dropout(x, 0.0, training, rng) is x

    def test_dropout_eval_is_identity(self, rng):
        x = Tensor(rng.normal(size=(2, 3)))
        assert dropout(x, 0.5, False, rng) is x

    def test_dropout_zeroes_and_scales(self, rng):
        x = Tensor(np.ones((100, 100)))
        out = dropout(x, 0.25, True, rng).data
        assert set(np.unique(out)) <= {0.0, 1.0 / 0.75}

    def test_dropout_expectation(self):
        r = np.random.default_rng(7)
        x = np.random.default_rng(8).uniform(0.5, 1.5, size=(4, 4))
        acc = np.zeros_like(x)
        for _ in range(10_000):
            acc += dropout(Tensor(x), 0.5, True, r).data
        np.testing.assert_allclose(acc / 10_000, x, rtol=0.05)

    def test_dropout_rate_bounds(self, rng):
        with pytest.raises(ValueError):
            dropout(Tensor(np.ones(2)), 1.0, True, rng)

    def test_concat_channel_count(self):
        out = concat_channels(Tensor(np.zeros((1, 4, 8, 8))), Tensor(np.zeros((1, 6, 8, 8))))
        assert out.shape == (1, 10, 8, 8)

    def test_concat_mismatch(self):
        with pytest.raises(ValueError):
            concat_channels(Tensor(np.zeros((1, 4, 8, 8))), Tensor(np.zeros((1, 6, 8, 7))))

    def test_concat_gradient_splits(self, rng):
        a, b = t64(rng.normal(size=(1, 2, 3, 3))), t64(rng.normal(size=(1, 3, 3, 3)))
        w = rng.normal(size=(1, 5, 3, 3))
        F.sum(mul(concat_channels(a, b), w)).backward()
        np.testing.assert_array_equal(a.grad, w[:, :2])
        np.testing.assert_array_equal(b.grad, w[:, 2:])


@settings(max_examples=25, deadline=None)
@given(
    h=st.integers(3, 9), w=st.integers(3, 9), k=st.sampled_from([1, 3, 5]),
    stride=st.integers(1, 3), pad=st.integers(0, 2), seed=st.integers(0, 2**31 - 1),
)
def test_adjoint_identity_property(h, w, k, stride, pad, seed):
    if h + 2 * pad < k or w + 2 * pad < k:
        return
    r = np.random.default_rng(seed)
    x = r.normal(size=(1, 2, h, w))
    kern = r.normal(size=(3, 2, k, k))
    y = r.normal(size=conv2d(Tensor(x), Tensor(kern), stride=stride, padding=pad).shape)
    lhs = np.sum(conv2d(Tensor(x), Tensor(kern), stride=stride, padding=pad).data * y)
    oph = h - ((y.shape[2] - 1) * stride - 2 * pad + k)
    opw = w - ((y.shape[3] - 1) * stride - 2 * pad + k)
    back = conv_transpose2d(Tensor(y), Tensor(kern), stride=stride, padding=pad, output_padding=(oph, opw))
    assert back.shape == x.shape
    assert abs(lhs - np.sum(x * back.data)) <= 1e-10 * max(1.0, abs(lhs))


class TestModulesAndCheckpoint:
    class Tiny(Module):
        def __init__(self):
            super().__init__()
            r = np.random.default_rng(0)
            self.conv = Conv2d(2, 3, 3, padding=1, bias=True, rng=r)
            self.bn = BatchNorm2d(3)

    def test_registration_order_and_roles(self):
        m = self.Tiny().assign_names()
        names = [n for n, _ in m.named_parameters()]
        assert names == ["conv.weight", "conv.bias", "bn.scale", "bn.shift", "bn.running_mean", "bn.running_var"]
        roles = [p.role for p in m.parameters()]
        assert roles == ["conv-kernel", "bias", "bn-scale", "bn-shift", "bn-running-stat", "bn-running-stat"]

    def test_running_stats_never_require_grad(self):
        m = self.Tiny()
        assert all(not p.requires_grad for p in m.parameters() if p.role == "bn-running-stat")
        assert len(m.parameters(trainable_only=True)) == 4

    def test_he_init_scale(self):
        conv = Conv2d(64, 64, 3, rng=np.random.default_rng(1))
        assert abs(conv.weight.data.std() - np.sqrt(2 / (64 * 9))) < 0.01 * np.sqrt(2 / (64 * 9)) * 5

    def test_bad_role(self):
        with pytest.raises(ValueError):
            Parameter(np.zeros(1), "weights")

    def test_checkpoint_round_trip(self, tmp_path):
        m = self.Tiny().assign_names()
        for p in m.parameters():
            p.data[...] = np.random.default_rng(5).normal(size=p.shape)
        save_checkpoint(m, tmp_path / "ck")
        blob = np.fromfile(tmp_path / "ck" / "weights.bin", dtype="<f4")
        assert blob.size == sum(p.size for p in m.parameters())
        m2 = load_checkpoint(self.Tiny(), tmp_path / "ck")
        for a, b in zip(m.parameters(), m2.parameters()):
            np.testing.assert_array_equal(a.data, b.data)

    def test_checkpoint_offsets(self, tmp_path):
        import json
        m = self.Tiny().assign_names()
        save_checkpoint(m, tmp_path)
        entries = json.loads((tmp_path / "weights.json").read_text())["parameters"]
        offsets = np.cumsum([0] + [4 * int(np.prod(e["shape"])) for e in entries])[:-1]
        assert [e["offset"] for e in entries] == list(offsets)

    def test_checkpoint_shape_mismatch(self, tmp_path):
        save_checkpoint(self.Tiny().assign_names(), tmp_path)
        other = Module()
        other.conv = Conv2d(2, 4, 3, padding=1, bias=True)
        other.bn = BatchNorm2d(4)
        with pytest.raises(ValueError):
            load_checkpoint(other, tmp_path)


def test_forward_is_deterministic():
    def run():
        r = np.random.default_rng(3)
        x = Tensor(r.normal(size=(2, 3, 8, 8)).astype(np.float32))
        k = Tensor(r.normal(size=(5, 3, 3, 3)).astype(np.float32))
        return conv_transpose2d(relu(conv2d(x, k, padding=1)), Tensor(np.transpose(k.data, (0, 1, 2, 3))),
                                stride=1, padding=1).data

    np.testing.assert_array_equal(run(), run())
