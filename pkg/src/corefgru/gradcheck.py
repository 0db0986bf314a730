"""Central-difference validation of reverse-mode gradients.

The checker treats the loss builder as a black box: it evaluates the loss
at perturbed parameter values and compares (f(p+eps) - f(p-eps)) / (2 eps)
against the gradients the tape reports.  Relative error uses
|a - n| / max(|a|, |n|, 1e-6), reported per parameter together with the
worst coordinate.  The 1e-6 floor keeps coordinates whose true gradient is
essentially zero from failing on central-difference roundoff, which is
about 1e-11 * |loss| at eps 1e-5 in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonDeterministic
from .tape import Parameters, Tape, Tensor

LossBuilder = Callable[[Tape], Tensor]


@dataclass
class ParamReport:
    name: str
    checked_coords: int
    max_rel_error: float
    worst_index: int
    worst_analytic: float
    worst_numeric: float

    def ok(self, tol: float) -> bool:
        return self.max_rel_error < tol


@dataclass
class GradCheckReport:
    eps: float
    tol: float
    per_param: list[ParamReport] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((p.max_rel_error for p in self.per_param), default=0.0)

    @property
    def passed(self) -> bool:
        return all(p.ok(self.tol) for p in self.per_param)

    def failures(self) -> list[ParamReport]:
        return [p for p in self.per_param if not p.ok(self.tol)]

    def format(self) -> str:
        lines = []
        for p in self.per_param:
            status = "ok" if p.ok(self.tol) else "FAIL"
            lines.append(
                f"{status:4s} {p.name:32s} coords={p.checked_coords:5d} "
                f"max_rel_err={p.max_rel_error:.3e} worst@{p.worst_index}"
            )
        lines.append(f"overall: max_rel_err={self.max_rel_error:.3e} "
                     f"{'PASS' if self.passed else 'FAIL'} (tol={self.tol:g})")
        return "\n".join(lines)


def _eval_loss(params: Parameters, build_loss: LossBuilder) -> float:
    tape = Tape(params)
    loss = build_loss(tape)
    if loss.data.shape != ():
        raise ValueError("loss builder must return a scalar node")
    return float(loss.data)


def grad_check(
    params: Parameters,
    build_loss: LossBuilder,
    eps: float = 1e-5,
    tol: float = 1e-4,
    max_coords: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare reverse-mode gradients of ``build_loss`` to central differences.

    ``max_coords`` bounds the total number of coordinates checked; when the
    parameters hold more, a seeded subsample of at least 200 coordinates is
    drawn, spread over every parameter.  ``None`` checks everything.
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError("eps must be in (0, 1e-2]")

    base1 = _eval_loss(params, build_loss)
    base2 = _eval_loss(params, build_loss)
    if base1 != base2:
        raise NonDeterministic(f"loss builder not deterministic: {base1!r} vs {base2!r}")

    params.zero_grads()
    tape = Tape(params)
    loss = build_loss(tape)
    tape.backward(loss)
    analytic = {name: params.grad(name).copy() for name in params.names()}

    names = params.names()
    total = params.total_size()
    budget = total if max_coords is None else max(200, max_coords)
    rng = np.random.default_rng(seed)

    report = GradCheckReport(eps=eps, tol=tol)
    for name in names:
        value = params.value(name)
        n = value.size
        if budget >= total:
            coords = np.arange(n)
        else:
            take = max(2, int(round(budget * n / total)))
            take = min(take, n)
            coords = rng.choice(n, size=take, replace=False)
        flat = value.reshape(-1)
        worst = (-1.0, 0, 0.0, 0.0)
        for c in coords:
            keep = flat[c]
            flat[c] = keep + eps
            f_plus = _eval_loss(params, build_loss)
            flat[c] = keep - eps
            f_minus = _eval_loss(params, build_loss)
            flat[c] = keep
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(analytic[name].reshape(-1)[c])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            if rel > worst[0]:
                worst = (rel, int(c), a, numeric)
        report.per_param.append(
            ParamReport(
                name=name,
                checked_coords=len(coords),
                max_rel_error=worst[0],
                worst_index=worst[1],
                worst_analytic=worst[2],
                worst_numeric=worst[3],
            )
        )
    return report
