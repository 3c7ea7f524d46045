"""Tests for the flat-parameter model and local training loop."""

import numpy as np
import pytest

from stragglersim import rng
from stragglersim.model import (
    ModelLayout,
    accuracy,
    forward_logits,
    init_params,
    local_sgd,
    loss_and_grad,
    predict,
    softmax,
)


def _random_problem(gen, layout, n, rho=0.0, nu=0.0, distill_loss="soft_ce", temp=1.0):
    """Random weights, batch, and optional teacher/anchor for a layout."""
    w = gen.standard_normal(layout.n_params) * 0.5
    x = gen.standard_normal((n, layout.d_in))
    y = gen.integers(layout.n_classes, size=n)
    kwargs = dict(rho=rho, nu=nu, distill_loss=distill_loss, distill_temperature=temp)
    if rho > 0:
        kwargs["teacher_logits"] = gen.standard_normal((n, layout.n_classes))
    if nu > 0:
        kwargs["anchor"] = gen.standard_normal(layout.n_params) * 0.5
    return w, x, y, kwargs


def _numeric_grad(w, layout, x, y, kwargs, h=1e-5):
    grad = np.empty_like(w)
    for i in range(len(w)):
        wp, wm = w.copy(), w.copy()
        wp[i] += h
        wm[i] -= h
        lp, _ = loss_and_grad(wp, layout, x, y, **kwargs)
        lm, _ = loss_and_grad(wm, layout, x, y, **kwargs)
        grad[i] = (lp.total - lm.total) / (2 * h)
    return grad


@pytest.mark.parametrize(
    "hidden,rho,nu,distill_loss",
    [
        (0, 0.0, 0.0, "soft_ce"),
        (0, 0.3, 0.0, "soft_ce"),
        (0, 0.3, 0.0, "logit_mse"),
        (0, 0.0, 0.7, "soft_ce"),
        (5, 0.0, 0.0, "soft_ce"),
        (5, 0.2, 0.5, "soft_ce"),
        (5, 0.2, 0.5, "logit_mse"),
    ],
)
def test_gradient_matches_central_differences(hidden, rho, nu, distill_loss):
    gen = rng.stream(17, rng.VERIFY, 0)
    layout = ModelLayout(d_in=4, hidden=hidden, n_classes=3)
    w, x, y, kwargs = _random_problem(
        gen, layout, n=6, rho=rho, nu=nu, distill_loss=distill_loss, temp=1.7
    )
    _, grad = loss_and_grad(w, layout, x, y, **kwargs)
    numeric = _numeric_grad(w, layout, x, y, kwargs)
    scale = max(1.0, float(np.abs(numeric).max()))
    assert np.abs(grad - numeric).max() / scale < 1e-6


def test_loss_composition_is_exact():
    gen = rng.stream(3, rng.VERIFY, 0)
    layout = ModelLayout(d_in=3, hidden=4, n_classes=3)
    w, x, y, kwargs = _random_problem(gen, layout, n=5, rho=0.4, nu=0.2)
    breakdown, _ = loss_and_grad(w, layout, x, y, **kwargs)
    assert breakdown.total == (
        breakdown.supervised + 0.4 * breakdown.distill + 0.2 * breakdown.proximal
    )


def test_distill_loss_is_at_least_teacher_entropy():
    # Cross entropy H(q, p) >= H(q), with equality only at p == q.
    gen = rng.stream(5, rng.VERIFY, 0)
    layout = ModelLayout(d_in=3, hidden=0, n_classes=4)
    for _ in range(20):
        w, x, y, kwargs = _random_problem(gen, layout, n=8, rho=1.0)
        breakdown, _ = loss_and_grad(w, layout, x, y, **kwargs)
        q = softmax(kwargs["teacher_logits"])
        entropy = float(-(q * np.log(q)).sum(axis=1).mean())
        assert breakdown.distill >= entropy - 1e-12


def test_zero_proximal_at_anchor():
    gen = rng.stream(6, rng.VERIFY, 0)
    layout = ModelLayout(d_in=3, hidden=0, n_classes=3)
    w, x, y, kwargs = _random_problem(gen, layout, n=4, nu=0.5)
    kwargs["anchor"] = w.copy()
    breakdown, _ = loss_and_grad(w, layout, x, y, **kwargs)
    assert breakdown.proximal == 0.0


def test_batch_order_invariance():
    gen = rng.stream(7, rng.VERIFY, 0)
    layout = ModelLayout(d_in=4, hidden=3, n_classes=3)
    w, x, y, kwargs = _random_problem(gen, layout, n=9, rho=0.2, nu=0.1)
    perm = gen.permutation(9)
    kwargs_perm = dict(kwargs)
    kwargs_perm["teacher_logits"] = kwargs["teacher_logits"][perm]
    a, ga = loss_and_grad(w, layout, x, y, **kwargs)
    b, gb = loss_and_grad(w, layout, x[perm], y[perm], **kwargs_perm)
    assert abs(a.total - b.total) < 1e-12
    assert np.abs(ga - gb).max() < 1e-12


def test_softmax_is_shift_invariant_and_overflow_safe():
    logits = np.array([[1000.0, 1001.0, 999.0], [0.0, 0.0, 0.0]])
    p = softmax(logits)
    assert np.isfinite(p).all()
    np.testing.assert_allclose(p.sum(axis=1), [1.0, 1.0], atol=1e-12)
    shifted = softmax(logits - 500.0)
    np.testing.assert_allclose(p, shifted, atol=1e-12)

    layout = ModelLayout(d_in=2, hidden=0, n_classes=3)
    w = np.zeros(layout.n_params)
    w[:6] = 1e3  # huge weights push logits to +-1e3
    x = np.array([[1.0, -1.0]])
    breakdown, grad = loss_and_grad(w, layout, x, np.array([0]))
    assert np.isfinite(breakdown.total)
    assert np.isfinite(grad).all()


def test_single_row_matches_batched_row():
    gen = rng.stream(8, rng.VERIFY, 0)
    layout = ModelLayout(d_in=5, hidden=4, n_classes=3)
    w = gen.standard_normal(layout.n_params)
    x = gen.standard_normal((6, 5))
    batched = forward_logits(w, layout, x)
    single = forward_logits(w, layout, x[2])
    np.testing.assert_array_equal(single, batched[2])


def test_predict_and_accuracy():
    layout = ModelLayout(d_in=2, hidden=0, n_classes=3)
    # Zero weights except biases: logits are the bias row for every input.
    w = np.zeros(layout.n_params)
    w[-3:] = [0.0, 1.0, 0.5]  # class 1 always wins
    x = np.zeros((4, 2))
    y = np.array([1, 1, 1, 0])
    np.testing.assert_array_equal(predict(w, layout, x), [1, 1, 1, 1])
    assert accuracy(w, layout, x, y) == 0.75
    with pytest.raises(ValueError):
        accuracy(w, layout, np.zeros((0, 2)), np.array([], dtype=int))


def test_local_sgd_matches_scalar_reference():
    # Re-derive two epochs of minibatch SGD with an index-by-index loop,
    # consuming the same shuffle stream.
    gen = rng.stream(9, rng.VERIFY, 0)
    layout = ModelLayout(d_in=3, hidden=0, n_classes=3)
    w0 = gen.standard_normal(layout.n_params) * 0.1
    x = gen.standard_normal((7, 3))
    y = gen.integers(3, size=7)

    got, steps, examples = local_sgd(
        w0, layout, x, y, eta_l=0.05, batch_size=3, epochs=2, gen=rng.stream(1, rng.SHUFFLE, 0)
    )

    ref_gen = rng.stream(1, rng.SHUFFLE, 0)
    w = w0.copy()
    ref_steps = ref_examples = 0
    for _ in range(2):
        perm = ref_gen.permutation(7)
        for start in range(0, 7, 3):
            idx = perm[start : start + 3]
            _, grad = loss_and_grad(w, layout, x[idx], y[idx])
            w = w - 0.05 * grad
            ref_steps += 1
            ref_examples += len(idx)
    assert steps == ref_steps == 6
    assert examples == ref_examples == 14
    assert np.abs(got - w).max() < 1e-12


def test_local_sgd_steps_mode_counts_short_batches():
    gen = rng.stream(10, rng.VERIFY, 0)
    layout = ModelLayout(d_in=2, hidden=0, n_classes=2)
    w0 = np.zeros(layout.n_params)
    x = gen.standard_normal((7, 2))
    y = gen.integers(2, size=7)
    # batches per epoch: 3, 3, 1; four steps roll into a second epoch
    _, steps, examples = local_sgd(
        w0, layout, x, y, eta_l=0.1, batch_size=3, steps=4, gen=rng.stream(0, rng.SHUFFLE, 0)
    )
    assert steps == 4
    assert examples == 10

    _, steps3, examples3 = local_sgd(
        w0, layout, x, y, eta_l=0.1, batch_size=3, steps=3, gen=rng.stream(0, rng.SHUFFLE, 0)
    )
    assert steps3 == 3
    assert examples3 == 7


def test_local_sgd_zero_learning_rate_is_identity():
    gen = rng.stream(11, rng.VERIFY, 0)
    layout = ModelLayout(d_in=3, hidden=2, n_classes=3)
    w0 = gen.standard_normal(layout.n_params)
    x = gen.standard_normal((5, 3))
    y = gen.integers(3, size=5)
    w, steps, examples = local_sgd(
        w0, layout, x, y, eta_l=0.0, batch_size=2, epochs=1, gen=rng.stream(2, rng.SHUFFLE, 0)
    )
    assert steps == 3
    assert examples == 5
    np.testing.assert_array_equal(w, w0)
    assert w is not w0


def test_local_sgd_descends_on_full_batch():
    gen = rng.stream(12, rng.VERIFY, 0)
    layout = ModelLayout(d_in=4, hidden=0, n_classes=3)
    w0 = gen.standard_normal(layout.n_params) * 0.1
    x = gen.standard_normal((30, 4))
    y = gen.integers(3, size=30)
    before, _ = loss_and_grad(w0, layout, x, y)
    w, _, _ = local_sgd(
        w0, layout, x, y, eta_l=0.05, batch_size=30, epochs=1, gen=rng.stream(3, rng.SHUFFLE, 0)
    )
    after, _ = loss_and_grad(w, layout, x, y)
    assert after.total < before.total


def test_local_sgd_distill_uses_fixed_teacher():
    gen = rng.stream(13, rng.VERIFY, 0)
    layout = ModelLayout(d_in=3, hidden=0, n_classes=3)
    w0 = gen.standard_normal(layout.n_params) * 0.2
    teacher = gen.standard_normal(layout.n_params) * 0.2
    x = gen.standard_normal((6, 3))
    y = gen.integers(3, size=6)

    got, _, _ = local_sgd(
        w0,
        layout,
        x,
        y,
        eta_l=0.1,
        batch_size=6,
        epochs=1,
        gen=rng.stream(4, rng.SHUFFLE, 0),
        rho=0.5,
        teacher_w=teacher,
    )
    perm = rng.stream(4, rng.SHUFFLE, 0).permutation(6)
    t_logits = forward_logits(teacher, layout, x[perm])
    _, grad = loss_and_grad(
        w0, layout, x[perm], y[perm], rho=0.5, teacher_logits=t_logits
    )
    np.testing.assert_allclose(got, w0 - 0.1 * grad, atol=1e-15)


def test_layout_param_counts():
    assert ModelLayout(d_in=16, hidden=0, n_classes=10).n_params == 170
    assert ModelLayout(d_in=16, hidden=32, n_classes=10).n_params == 874
    with pytest.raises(ValueError):
        ModelLayout(d_in=0, hidden=1, n_classes=2)
    with pytest.raises(ValueError):
        ModelLayout(d_in=2, hidden=1, n_classes=2, activation="relu")


def test_init_params_shape_and_scale():
    layout = ModelLayout(d_in=4, hidden=3, n_classes=2)
    w = init_params(layout, rng.stream(0, rng.INIT), scale=0.1)
    assert w.shape == (layout.n_params,)
    assert w.dtype == np.float64
    assert np.abs(w).max() <= 0.1


def test_argument_contracts():
    layout = ModelLayout(d_in=2, hidden=0, n_classes=2)
    w = np.zeros(layout.n_params)
    x = np.zeros((2, 2))
    y = np.array([0, 1])
    gen = rng.stream(0, rng.SHUFFLE, 0)
    with pytest.raises(ValueError):
        loss_and_grad(w, layout, x, y, rho=0.1)  # teacher missing
    with pytest.raises(ValueError):
        loss_and_grad(w, layout, x, y, teacher_logits=np.zeros((2, 2)))  # rho == 0
    with pytest.raises(ValueError):
        loss_and_grad(w, layout, x, y, nu=0.1)  # anchor missing
    with pytest.raises(ValueError):
        loss_and_grad(w, layout, x, y, anchor=w)  # nu == 0
    with pytest.raises(ValueError):
        loss_and_grad(w, layout, x, y, rho=0.1, teacher_logits=np.zeros((2, 2)), distill_loss="kl")
    with pytest.raises(ValueError):
        loss_and_grad(w, layout, np.zeros((0, 2)), np.array([], dtype=int))
    with pytest.raises(ValueError):
        local_sgd(w, layout, x, y, eta_l=0.1, batch_size=1, gen=gen)  # neither bound
    with pytest.raises(ValueError):
        local_sgd(w, layout, x, y, eta_l=0.1, batch_size=1, epochs=1, steps=1, gen=gen)
    with pytest.raises(ValueError):
        local_sgd(w, layout, x, y, eta_l=-0.1, batch_size=1, epochs=1, gen=gen)
    with pytest.raises(ValueError):
        local_sgd(w, layout, x, y, eta_l=0.1, batch_size=1, epochs=1, gen=gen, rho=0.5)
