import numpy as np
import pytest

from trusslat.autodiff import (
    NumericError,
    Tensor,
    binarize_straight_through,
    concat,
    constant,
    eigenvalues_symmetric,
    numeric_gradient,
    parameter,
)


def check_grad(build, x0, rel=1e-6, h=1e-5):
    """Compare reverse-mode and central-difference gradients of build(x)."""
    p = parameter(x0)
    out = build(p)
    out.backward()

    def scalar(v):
        return float(build(Tensor(v)).data)

    fd = numeric_gradient(scalar, x0.copy(), h=h)
    scale = np.abs(fd) + 1e-8
    assert np.max(np.abs(p.grad - fd) / scale) < rel


class TestBasicOps:
    rng = np.random.default_rng(0)

    def test_quadratic(self):
        p = parameter(self.rng.normal(size=7))
        ((p**2).sum() * 0.5).backward()
        assert np.allclose(p.grad, p.data)

    def test_constant_loss_zero_grad(self):
        p = parameter(np.ones(4))
        (constant(3.0) + p.sum() * 0.0).backward()
        assert np.allclose(p.grad, 0.0)

    @pytest.mark.parametrize(
        "fn",
        [
            lambda t: (t.tanh() ** 2).sum(),
            lambda t: t.sigmoid().mean(),
            lambda t: (t * 2.0 + 1.0).exp().sum() * 1e-2,
            lambda t: ((t**2) + 1.0).log().sum(),
            lambda t: ((t**2) + 0.5).sqrt().sum(),
            lambda t: t.softplus().sum(),
            lambda t: (t.relu() * t).sum(),
            lambda t: (t / 3.0 - 2.0 / (t**2 + 1.0)).sum(),
        ],
    )
    def test_elementwise_vs_fd(self, fn):
        x0 = self.rng.normal(size=9) + 0.1  # keep relu inputs away from 0
        check_grad(fn, x0)

    def test_matmul_broadcast_bias(self):
        w0 = self.rng.normal(size=(4, 3))
        x = self.rng.normal(size=(5, 4))
        b = self.rng.normal(size=3)

        def build(wt):
            w = wt.reshape(4, 3)
            return ((Tensor(x) @ w + Tensor(b)).tanh() ** 2).sum()

        check_grad(build, w0.ravel())

    def test_slice_and_concat(self):
        x0 = self.rng.normal(size=(6, 5)).ravel()

        def build(t):
            m = t.reshape(6, 5)
            c = concat([m[:, :2] * 2.0, m[:, 2:]], axis=1)
            return (c.tanh()).sum()

        check_grad(build, x0)

    def test_mean_axis(self):
        x0 = self.rng.normal(size=(4, 6)).ravel()

        def build(t):
            return (t.reshape(4, 6).mean(axis=1) ** 2).sum()

        check_grad(build, x0)

    def test_backward_requires_scalar(self):
        with pytest.raises(ValueError):
            parameter(np.ones(3)).backward()

    def test_check_finite(self):
        with pytest.raises(NumericError):
            (parameter(np.array([1.0])) / 0.0).check_finite("test")


class TestSpecialOps:
    def test_straight_through_forward_and_grad(self):
        p = parameter(np.array([0.2, 0.8, 0.5]))
        out = binarize_straight_through(p)
        assert np.array_equal(out.data, [0.0, 1.0, 0.0])  # tie at 0.5 -> 0
        (out * np.array([1.0, 2.0, 3.0])).sum().backward()
        assert np.allclose(p.grad, [1.0, 2.0, 3.0])  # identity gradient

    def test_eigenvalues_value_and_grad(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(3, 3))
        sym = (a + a.T) / 2

        def build(t):
            m = t.reshape(1, 3, 3)
            lam = eigenvalues_symmetric(m)
            return (lam * np.array([1.0, 2.0, 3.0])).sum()

        p = parameter(sym.ravel())
        out = build(p)
        lam_expect = np.linalg.eigvalsh(sym)
        assert out.data == pytest.approx(float(lam_expect @ [1.0, 2.0, 3.0]))
        out.backward()
        fd = numeric_gradient(lambda v: float(build(Tensor(v)).data), sym.ravel().copy())
        # fd of eigenvalues of a symmetrized input: project both to symmetric part
        g = p.grad.reshape(3, 3)
        gf = fd.reshape(3, 3)
        assert np.allclose((g + g.T) / 2, (gf + gf.T) / 2, atol=1e-6)


class TestGradientAccumulation:
    def test_shared_subexpression(self):
        p = parameter(np.array([2.0]))
        y = p * 3.0
        (y * y).sum().backward()  # d/dp (9 p^2) = 18 p
        assert np.allclose(p.grad, 36.0)

    def test_two_backwards_isolated(self):
        p = parameter(np.array([1.0, 2.0]))
        (p**2).sum().backward()
        g1 = p.grad.copy()
        p.grad = None
        (p**2).sum().backward()
        assert np.allclose(p.grad, g1)
