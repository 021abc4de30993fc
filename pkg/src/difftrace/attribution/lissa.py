"""LiSSA inverse-Hessian-vector products and the influence-function baseline."""

from __future__ import annotations

import logging
from collections.abc import Callable

import numpy as np

from ..diffusion.noise import noise_from_seed
from ..engine.loss import loss_hvp
from ..errors import ArgumentError, LissaDivergenceError
from ..training.records import Checkpoint, TrainingRun
from ..training.trainer import NOISE_SEED_BOUND
from .config import AttributionConfig, LissaConfig
from .gradients import test_gradient

logger = logging.getLogger(__name__)

# (vector, repeat index) -> H @ vector; the repeat index selects the Hessian batch
HvpFn = Callable[[np.ndarray, int], np.ndarray]

DIVERGENCE_RATIO = 1e6


def lissa_inverse_hvp(
    hvp: HvpFn,
    vector: np.ndarray,
    depth: int,
    damping: float = 0.0,
    scale: float = 10.0,
    repeats: int = 1,
) -> np.ndarray:
    """Estimate ``(H + damping * I)^{-1} v`` by the LiSSA recursion.

    ``v_j = v + (I - (H + damping * I) / scale) v_{j-1}``; the estimate is
    ``v_depth / scale`` averaged over ``repeats``. Converges when the eigenvalues of
    ``(H + damping * I) / scale`` lie in (0, 2).

    Raises:
        ArgumentError: non-positive depth/scale/repeats or negative damping.
        LissaDivergenceError: an iterate grew beyond 1e6 times ``||v||``.
    """
    if depth < 1 or repeats < 1:
        raise ArgumentError("depth and repeats must be >= 1")
    if scale <= 0.0 or damping < 0.0:
        raise ArgumentError(f"Need scale > 0 and damping >= 0, got scale={scale}, damping={damping}")
    vector = np.asarray(vector, dtype=np.float64)
    limit = DIVERGENCE_RATIO * max(float(np.linalg.norm(vector)), np.finfo(float).tiny)
    estimate = np.zeros_like(vector)
    for repeat in range(repeats):
        current = vector.copy()
        for j in range(depth):
            current = vector + current - (hvp(current, repeat) + damping * current) / scale
            norm = float(np.linalg.norm(current))
            if not np.isfinite(norm) or norm > limit:
                raise LissaDivergenceError(
                    f"LiSSA recursion diverged (|v_j|={norm:.3e}); increase scale or damping",
                    where=f"repeat {repeat}, iteration {j}",
                )
        estimate += current / scale
        logger.debug("LiSSA repeat %d done", repeat)
    return estimate / repeats


def training_hvp(run: TrainingRun, checkpoint: Checkpoint, lissa: LissaConfig) -> HvpFn:
    """Hessian of the mean training loss over a seeded batch of (sample, t, eps) draws."""
    n_samples = run.dataset.shape[0]
    batches = []
    for repeat in range(lissa.repeats):
        rng = np.random.default_rng([lissa.seed, repeat])
        batches.append(
            [
                (
                    int(rng.integers(0, n_samples)),
                    int(rng.integers(1, run.schedule.T + 1)),
                    noise_from_seed(int(rng.integers(0, NOISE_SEED_BOUND)), run.spec.input_dim),
                )
                for _ in range(lissa.hessian_batch)
            ]
        )

    def hvp(vector: np.ndarray, repeat: int) -> np.ndarray:
        total = np.zeros_like(vector)
        for sample_id, t, eps in batches[repeat % len(batches)]:
            total += loss_hvp(
                checkpoint.params,
                run.spec,
                run.schedule,
                run.dataset[sample_id],
                t,
                eps,
                vector,
                step=lissa.hvp_step,
            )
        return total / len(batches[repeat % len(batches)])

    return hvp


def inverse_hvp_test(
    run: TrainingRun, z_test: np.ndarray, checkpoint: Checkpoint, cfg: AttributionConfig
) -> np.ndarray:
    """``H^{-1}`` applied to the expected test-loss gradient."""
    g_test = test_gradient(z_test, checkpoint, cfg, False, spec=run.spec, schedule=run.schedule)
    lissa = cfg.lissa
    return lissa_inverse_hvp(
        training_hvp(run, checkpoint, lissa),
        g_test.vector.values,
        depth=lissa.depth,
        damping=lissa.damping,
        scale=lissa.scale,
        repeats=lissa.repeats,
    )


def influence_function(
    run: TrainingRun,
    z: np.ndarray,
    z_test: np.ndarray,
    checkpoint: Checkpoint,
    cfg: AttributionConfig,
    s_test: np.ndarray | None = None,
) -> float:
    """Up-weighting influence ``-<grad L(z_test), H^{-1} grad L(z)>``.

    Both losses use the timestep/noise expectation of ``test_gradient``. ``H`` is
    symmetric, so the inverse is applied on the test side once (``s_test``) and reused.
    Negative values mean up-weighting ``z`` lowers the test loss.
    """
    if s_test is None:
        s_test = inverse_hvp_test(run, z_test, checkpoint, cfg)
    g_z = test_gradient(z, checkpoint, cfg, False, spec=run.spec, schedule=run.schedule)
    return -float(np.dot(s_test, g_z.vector.values))
