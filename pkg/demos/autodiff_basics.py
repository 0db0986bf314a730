#!/usr/bin/env python3
"""Tour of the tape-based autodiff core.

Builds a few small graphs, runs the backward pass, and compares every
gradient against the closed form.  Run from anywhere after installing the
package:

    python3 demos/autodiff_basics.py
"""

import numpy as np

from corefgru import ops
from corefgru.gradcheck import grad_check
from corefgru.tape import Parameters, Tape


def scalar_chain():
    """d/dw of (w * 3 + 1)^2 at w = 2, against the hand derivative 42."""
    params = Parameters()
    params.add("w", np.array(2.0))
    tape = Tape(params)
    w = tape.param("w")
    y = ops.mul(ops.add(ops.mul(w, tape.const(np.array(3.0))), tape.const(np.array(1.0))),
                ops.add(ops.mul(w, tape.const(np.array(3.0))), tape.const(np.array(1.0))))
    params.zero_grads()
    tape.backward(y)
    grad = float(params.grad("w"))
    print(f"scalar chain: value={float(y.data):.1f} dy/dw={grad:.1f} (expected 42.0)")
    assert grad == 42.0


def matmul_softmax_loss():
    """Cross-entropy through softmax: gradient is probs - onehot, scaled."""
    rng = np.random.default_rng(0)
    params = Parameters()
    params.add("W", rng.standard_normal((4, 3)))
    x = rng.standard_normal((2, 4))
    targets = np.array([0, 2])

    tape = Tape(params)
    logits = ops.matmul(tape.const(x), tape.param("W"))
    probs = ops.softmax(logits, axis=-1)
    loss = ops.mean_all(ops.cross_entropy(probs, targets))
    params.zero_grads()
    tape.backward(loss)

    # closed form: x^T (probs - onehot) / batch
    p = probs.data.copy()
    p[np.arange(2), targets] -= 1.0
    expected = x.T @ p / 2
    err = np.abs(params.grad("W") - expected).max()
    print(f"softmax cross-entropy: loss={float(loss.data):.4f} grad err vs closed form={err:.2e}")
    assert err < 1e-12


def gradients_accumulate():
    """Two uses of one parameter sum their gradient contributions."""
    params = Parameters()
    params.add("w", np.array([1.0, 2.0]))
    tape = Tape(params)
    w = tape.param("w")
    y = ops.sum_all(ops.add(ops.mul(w, w), w))  # sum(w^2 + w), grad 2w + 1
    params.zero_grads()
    tape.backward(y)
    print(f"shared parameter: grad={params.grad('w')} (expected [3, 5])")
    assert np.array_equal(params.grad("w"), [3.0, 5.0])


def audited_by_finite_differences():
    """The same checker the test suite uses, on a random two-layer map."""
    rng = np.random.default_rng(1)
    params = Parameters()
    params.add("W1", rng.standard_normal((5, 8)))
    params.add("W2", rng.standard_normal((8, 3)))
    x = rng.standard_normal((4, 5))

    def build_loss(tape: Tape):
        h = ops.tanh(ops.matmul(tape.const(x), tape.param("W1")))
        out = ops.sigmoid(ops.matmul(h, tape.param("W2")))
        return ops.mean_all(out)

    report = grad_check(params, build_loss, eps=1e-5, tol=1e-4)
    print(report.format())
    assert report.passed


def main():
    scalar_chain()
    matmul_softmax_loss()
    gradients_accumulate()
    audited_by_finite_differences()
    print("all autodiff demos agree with the closed forms")


if __name__ == "__main__":
    main()
