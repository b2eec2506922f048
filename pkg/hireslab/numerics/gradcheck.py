"""
Analytic gradients and finite-difference verification.
"""
from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Union

import numpy as np

from hireslab.config import settings
from hireslab.numerics.tensor import Tensor, enable_grad, no_grad, precision

OpClosure = Callable[[Dict[str, Tensor]], Tensor]
ArrayInput = Union[np.ndarray, Tensor]

# Floor of the relative-error denominator
REL_ERROR_FLOOR = 1e-8


@dataclass
class GradResult:
    """Op output plus the gradient of sum(output) for every named input."""

    value: Tensor
    grads: Dict[str, Tensor]


def _as_arrays(inputs: Mapping[str, ArrayInput], dtype) -> Dict[str, np.ndarray]:
    arrays = {}
    for name, value in inputs.items():
        data = value.data if isinstance(value, Tensor) else np.asarray(value)
        arrays[name] = np.array(data, dtype=dtype, copy=True)
    return arrays


def value_and_grad(fn: OpClosure, inputs: Mapping[str, ArrayInput]) -> GradResult:
    """
    Evaluate ``fn`` and back-propagate the scalar loss sum(fn(inputs)).

    Args:
        fn: Closure mapping named input tensors to an output tensor
        inputs: Named arrays; each becomes a leaf tensor requiring gradients

    Returns:
        GradResult with the output and one gradient per input (same shapes)
    """
    dtype = _common_dtype(inputs) if inputs else None
    leaves = {
        name: Tensor(value, requires_grad=True, name=name)
        for name, value in _as_arrays(inputs, dtype).items()
    }
    with enable_grad():
        out = fn(leaves)
        out.sum().backward()
    grads = {
        name: Tensor(leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data), name=name)
        for name, leaf in leaves.items()
    }
    return GradResult(value=out.detach(), grads=grads)


def _common_dtype(inputs: Mapping[str, ArrayInput]):
    kinds = [
        (v.data if isinstance(v, Tensor) else np.asarray(v)).dtype for v in inputs.values()
    ]
    return np.result_type(*kinds) if all(k.kind == "f" for k in kinds) else np.float64


def _outputs(fn: OpClosure, arrays: Mapping[str, np.ndarray]) -> np.ndarray:
    with no_grad():
        out = fn({name: Tensor(value) for name, value in arrays.items()})
    return out.data


def grad_check_report(
    fn: OpClosure,
    inputs: Mapping[str, ArrayInput],
    eps: Optional[float] = None,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Dict[str, float]:
    """
    Compare analytic gradients with central finite differences, per input.

    The numeric derivative is (f(x + eps) - f(x - eps)) / (2 eps) with
    f = sum of outputs; the per-coordinate error is
    |a - n| / max(|a|, |n|, 1e-8). Checks always run in double precision.

    Args:
        fn: Op closure over named tensors
        inputs: Named arrays to differentiate against
        eps: Finite-difference step; defaults to settings.gradcheck_eps
        max_coords: If set, check at most this many randomly chosen coordinates per input
        rng: Generator used for coordinate sampling

    Returns:
        Dict of input name -> max relative error over the checked coordinates
    """
    eps = settings.gradcheck_eps if eps is None else eps
    rng = rng if rng is not None else np.random.default_rng(0)
    report: Dict[str, float] = {}
    with precision("float64"):
        arrays = _as_arrays(inputs, np.float64)
        analytic = value_and_grad(fn, arrays).grads
        for name, base in arrays.items():
            size = base.size
            if max_coords is not None and size > max_coords:
                coords = np.sort(rng.choice(size, size=max_coords, replace=False))
            else:
                coords = np.arange(size)
            worst = 0.0
            for flat in coords:
                shifted = dict(arrays)
                probe = base.copy()
                probe.flat[flat] = base.flat[flat] + eps
                shifted[name] = probe
                out_plus = _outputs(fn, shifted)
                probe = base.copy()
                probe.flat[flat] = base.flat[flat] - eps
                shifted[name] = probe
                out_minus = _outputs(fn, shifted)
                # equals sum(out+) - sum(out-), differenced elementwise before the reduction
                numeric = float(np.sum(out_plus - out_minus)) / (2.0 * eps)
                exact = float(analytic[name].data.flat[flat])
                denom = max(abs(exact), abs(numeric), REL_ERROR_FLOOR)
                worst = max(worst, abs(exact - numeric) / denom)
            report[name] = worst
    return report


def grad_check(
    fn: OpClosure,
    inputs: Mapping[str, ArrayInput],
    eps: Optional[float] = None,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Max relative error between analytic and finite-difference gradients."""
    report = grad_check_report(fn, inputs, eps=eps, max_coords=max_coords, rng=rng)
    return max(report.values(), default=0.0)
