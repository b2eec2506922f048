"""
Gradient Check Registry

Named finite-difference checks for every primitive op and for the composed
modules (attention, SliceRestore adapter, sampler, depth-2 ViT). Each check
builds random double-precision inputs from a seed and reports the maximum
relative error against its threshold.

Op outputs are contracted with a fixed random probe array before the sum
reduction, so the checked loss is sum(probe * op(x)) rather than the plain
sum of outputs. A bare sum would make softmax and layer-norm gradients vanish
identically. Every coordinate is checked unless a ``max_coords`` budget is
given.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from hireslab.config import settings
from hireslab.models.config import SamplerConfig, VitConfig
from hireslab.models.features import FeatureMap, grid_coords
from hireslab.models.grid import GridSpec
from hireslab.numerics.attention import cross_attention, mhsa
from hireslab.numerics.gradcheck import grad_check
from hireslab.numerics import ops
from hireslab.numerics.params import AttentionWeights, bind_params, flatten_params
from hireslab.numerics.tensor import Tensor, precision
from hireslab.services.sampler_service import SmsWeights, sms_forward
from hireslab.services.slice_restore_service import SraWeights, sra_forward
from hireslab.services.vit_service import encoder_forward, init_vit_weights
from hireslab.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

PRIMITIVE_THRESHOLD = 1e-6
COMPOSED_THRESHOLD = 1e-4
# Weight scale for composed checks
CHECK_STD = 0.4

Inputs = Dict[str, np.ndarray]
Closure = Callable[[Dict[str, Tensor]], Tensor]


@dataclass
class GradCheckCase:
    fn: Closure
    inputs: Inputs


@dataclass
class GradCheckSpec:
    name: str
    threshold: float
    build: Callable[[np.random.Generator], GradCheckCase]
    composed: bool = False


class GradCheckResult(BaseModel):
    name: str
    seed: int
    max_rel_error: float
    threshold: float
    passed: bool


def _probed(fn: Closure, probe: np.ndarray) -> Closure:
    """Loss becomes sum(probe * fn(x)); the probe is drawn from the check seed."""
    weights = Tensor(probe, dtype=np.float64)
    return lambda t: fn(t) * weights


def _positive(rng: np.random.Generator, *shape) -> np.ndarray:
    return rng.uniform(0.5, 1.5, size=shape)


def _normal(rng: np.random.Generator, *shape, std: float = 1.0) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


# ----------------------------------------------------------------------
# Primitive ops
# ----------------------------------------------------------------------
def _matmul_case(rng):
    a, b = _positive(rng, 3, 4), _positive(rng, 4, 2)
    fn = lambda t: ops.matmul(t["a"], t["b"])
    return GradCheckCase(_probed(fn, _positive(rng, 3, 2)), {"a": a, "b": b})


def _softmax_case(rng):
    # one-hot probe rows keep every gradient coordinate away from zero
    probe = np.zeros((3, 5))
    probe[np.arange(3), rng.integers(0, 5, size=3)] = 1.0
    fn = lambda t: ops.softmax_rows(t["x"])
    return GradCheckCase(_probed(fn, probe), {"x": _normal(rng, 3, 5)})


def _layer_norm_case(rng):
    fn = lambda t: ops.layer_norm(t["x"], t["gamma"], t["beta"])
    inputs = {"x": _normal(rng, 3, 6), "gamma": _positive(rng, 6), "beta": _normal(rng, 6)}
    return GradCheckCase(_probed(fn, _normal(rng, 3, 6)), inputs)


def _gelu_case(rng):
    fn = lambda t: ops.gelu(t["x"])
    return GradCheckCase(_probed(fn, _positive(rng, 4, 3)), {"x": rng.uniform(0.1, 2.0, size=(4, 3))})


def _conv_case(rng):
    fn = lambda t: ops.depthwise_conv3x3(t["f"], t["kernel"])
    inputs = {"f": _positive(rng, 5, 5, 2), "kernel": _positive(rng, 3, 3, 2)}
    return GradCheckCase(_probed(fn, _positive(rng, 5, 5, 2)), inputs)


def _pool_case(rng):
    fn = lambda t: ops.avg_pool2d(t["f"], 2)
    return GradCheckCase(_probed(fn, _positive(rng, 2, 3, 2)), {"f": _normal(rng, 4, 6, 2)})


def _resize_case(rng):
    fn = lambda t: ops.resize_bilinear(t["f"], 3, 5)
    return GradCheckCase(_probed(fn, _positive(rng, 3, 5, 2)), {"f": _normal(rng, 4, 4, 2)})


def _rope_case(rng):
    coords = grid_coords(2, 2)
    fn = lambda t: ops.rope2d(t["x"], coords)
    return GradCheckCase(_probed(fn, _normal(rng, 4, 8)), {"x": _normal(rng, 4, 8)})


def _concat_case(rng):
    fn = lambda t: ops.concat([t["a"], t["b"]], axis=0)
    return GradCheckCase(_probed(fn, _normal(rng, 5, 3)), {"a": _normal(rng, 2, 3), "b": _normal(rng, 3, 3)})


def _cross_entropy_case(rng):
    targets = [int(k) for k in rng.integers(0, 4, size=3)]
    return GradCheckCase(lambda t: ops.cross_entropy(t["logits"], targets), {"logits": _normal(rng, 3, 4)})


# ----------------------------------------------------------------------
# Composed modules
# ----------------------------------------------------------------------
def _weights_case(
    rng: np.random.Generator,
    tree,
    forward: Callable[[object, Dict[str, Tensor]], Tensor],
    extra_inputs: Inputs,
    out_shape: Tuple[int, ...],
) -> GradCheckCase:
    """Check over every leaf of a weight tree plus extra named inputs."""
    leaves = {f"w.{name}": tensor.data.astype(np.float64) for name, tensor in flatten_params(tree).items()}

    def fn(t: Dict[str, Tensor]) -> Tensor:
        bound = bind_params(tree, {name[2:]: t[name] for name in leaves})
        return forward(bound, t)

    return GradCheckCase(_probed(fn, _normal(rng, *out_shape)), {**leaves, **extra_inputs})


def _mhsa_case(rng):
    attn = AttentionWeights.init(8, 2, rng, use_rope2d=True, std=CHECK_STD)
    coords = grid_coords(2, 3)
    return _weights_case(
        rng, attn, lambda w, t: mhsa(t["x"], w, coords=coords), {"x": _normal(rng, 6, 8)}, (6, 8)
    )


def _cross_attention_case(rng):
    attn = AttentionWeights.init(8, 2, rng, std=CHECK_STD)
    return _weights_case(
        rng,
        attn,
        lambda w, t: cross_attention(t["q"], t["kv"], w),
        {"q": _normal(rng, 2, 8), "kv": _normal(rng, 6, 8)},
        (2, 8),
    )


def _sra_case(rng):
    grid = GridSpec(r=4, m=2, n=2, quadrupled=False, canvas_h=8, canvas_w=8)
    sra = SraWeights.init(8, 2, rng, down_factor=2, std=CHECK_STD)
    names = [f"s{k}" for k in range(4)]

    def forward(w, t):
        slices = [FeatureMap(tokens=t[name], spatial=(4, 4)) for name in names]
        return ops.concat([f.tokens for f in sra_forward(slices, grid, w)], axis=0)

    return _weights_case(rng, sra, forward, {name: _normal(rng, 16, 8) for name in names}, (64, 8))


def _sms_case(rng):
    sms = SmsWeights.init(8, SamplerConfig(pool_size=2, heads=2), rng, std=CHECK_STD)

    def forward(w, t):
        return sms_forward(FeatureMap(tokens=t["p"], spatial=(4, 4)), w)

    return _weights_case(rng, sms, forward, {"p": _normal(rng, 16, 8)}, (4, 8))


def _vit_case(rng):
    cfg = VitConfig(input_size=8, patch_size=4, dim=8, depth=2, heads=2, adapter_layers=[1], mlp_ratio=2.0)
    grid = GridSpec(r=8, m=2, n=2, quadrupled=False, canvas_h=16, canvas_w=16)
    tree = {
        "vit": init_vit_weights(cfg, rng, std=CHECK_STD),
        "sra": {1: SraWeights.init(cfg.dim, cfg.heads, rng, down_factor=2, std=CHECK_STD)},
    }
    names = [f"s{k}" for k in range(4)]

    def forward(w, t):
        slices = [FeatureMap(tokens=t[name], spatial=(2, 2)) for name in names]
        out = encoder_forward(slices, grid, w["vit"], w["sra"])
        return ops.concat([f.tokens for f in out], axis=0)

    return _weights_case(rng, tree, forward, {name: _normal(rng, 4, 8) for name in names}, (16, 8))


REGISTRY: Dict[str, GradCheckSpec] = {
    spec.name: spec
    for spec in (
        GradCheckSpec("matmul", PRIMITIVE_THRESHOLD, _matmul_case),
        GradCheckSpec("softmax_rows", PRIMITIVE_THRESHOLD, _softmax_case),
        GradCheckSpec("layer_norm", PRIMITIVE_THRESHOLD, _layer_norm_case),
        GradCheckSpec("gelu", PRIMITIVE_THRESHOLD, _gelu_case),
        GradCheckSpec("depthwise_conv3x3", PRIMITIVE_THRESHOLD, _conv_case),
        GradCheckSpec("avg_pool2d", PRIMITIVE_THRESHOLD, _pool_case),
        GradCheckSpec("resize_bilinear", PRIMITIVE_THRESHOLD, _resize_case),
        GradCheckSpec("rope2d", PRIMITIVE_THRESHOLD, _rope_case),
        GradCheckSpec("concat", PRIMITIVE_THRESHOLD, _concat_case),
        GradCheckSpec("cross_entropy", PRIMITIVE_THRESHOLD, _cross_entropy_case),
        GradCheckSpec("mhsa", COMPOSED_THRESHOLD, _mhsa_case, composed=True),
        GradCheckSpec("cross_attention", COMPOSED_THRESHOLD, _cross_attention_case, composed=True),
        GradCheckSpec("sra", COMPOSED_THRESHOLD, _sra_case, composed=True),
        GradCheckSpec("sms", COMPOSED_THRESHOLD, _sms_case, composed=True),
        GradCheckSpec("vit", COMPOSED_THRESHOLD, _vit_case, composed=True),
    )
}


def run_check(
    name: str,
    seed: int = 0,
    eps: Optional[float] = None,
    max_coords: Optional[int] = None,
) -> GradCheckResult:
    """
    Run one named check.

    Args:
        name: Registered check name
        seed: Seed for inputs, weights and the contraction probe
        eps: Finite-difference step; defaults to settings.gradcheck_eps
        max_coords: Optional per-input budget of randomly sampled coordinates

    Raises:
        ConfigurationError: If the name is not registered
    """
    if name not in REGISTRY:
        raise ConfigurationError(f"unknown gradient check {name!r}; known: {sorted(REGISTRY)}")
    spec = REGISTRY[name]
    rng = np.random.default_rng(seed)
    with precision("float64"):
        case = spec.build(rng)
        error = grad_check(case.fn, case.inputs, eps=eps, max_coords=max_coords, rng=rng)
    result = GradCheckResult(
        name=name, seed=seed, max_rel_error=error, threshold=spec.threshold, passed=error < spec.threshold
    )
    logger.info(
        f"Gradient check | Op: {name} | Seed: {seed} | Error: {error:.3e} | "
        f"Threshold: {spec.threshold:.0e} | Passed: {result.passed}"
    )
    return result


def run_checks(
    names: Optional[Sequence[str]] = None,
    seeds: Sequence[int] = (0,),
    eps: Optional[float] = None,
    max_coords: Optional[int] = None,
) -> List[GradCheckResult]:
    """Run the named checks (all when ``names`` is empty) for every seed."""
    eps = settings.gradcheck_eps if eps is None else eps
    selected = list(names) if names else list(REGISTRY)
    return [run_check(name, seed, eps, max_coords) for name in selected for seed in seeds]


def summarize(results: Sequence[GradCheckResult]) -> Mapping[str, dict]:
    """Worst error per check name."""
    table: Dict[str, dict] = {}
    for result in results:
        entry = table.setdefault(
            result.name, {"max_rel_error": 0.0, "threshold": result.threshold, "passed": True, "seeds": 0}
        )
        entry["max_rel_error"] = max(entry["max_rel_error"], result.max_rel_error)
        entry["passed"] = entry["passed"] and result.passed
        entry["seeds"] += 1
    return table
