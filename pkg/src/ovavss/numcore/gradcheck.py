from typing import Callable

import numpy as np

from ovavss.errors import EvaluationError, InputError, NumericalError
from ovavss.numcore.tensor import Tensor, no_grad


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    eps: float = 1e-5,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-6,
) -> float:
    """Max relative error between autodiff and central differences of scalar f at x.

    With `max_entries`, only that many randomly chosen coordinates are checked.
    Relative error is |a - n| / max(|a| + |n|, floor).
    """
    if not 1e-6 <= eps <= 1e-3:
        raise InputError(f"eps must lie in [1e-6, 1e-3], got {eps}")
    x.requires_grad = True
    x.grad = None
    try:
        out = f(x)
    except (ArithmeticError, NumericalError) as e:
        raise EvaluationError(f"f(x) failed: {e}") from e
    if out.size != 1 or not np.isfinite(out.data).all():
        raise EvaluationError(f"f(x) must be a finite scalar, got {out.data!r}")
    out.backward()
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()

    flat = x.data.reshape(-1)
    indices = np.arange(flat.size)
    if max_entries is not None and max_entries < flat.size:
        indices = (rng or np.random.default_rng(0)).choice(flat.size, size=max_entries, replace=False)

    worst = 0.0
    with no_grad():
        for i in indices:
            orig = flat[i]
            flat[i] = orig + eps
            plus = _evaluate(f, x)
            flat[i] = orig - eps
            minus = _evaluate(f, x)
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * eps)
            a = analytic.reshape(-1)[i]
            worst = max(worst, abs(a - numeric) / max(abs(a) + abs(numeric), floor))
    return worst


def _evaluate(f, x: Tensor) -> float:
    try:
        value = f(x).item()
    except (ArithmeticError, NumericalError) as e:
        raise EvaluationError(f"f(x) failed: {e}") from e
    if not np.isfinite(value):
        raise EvaluationError(f"f(x) is not finite: {value}")
    return value
