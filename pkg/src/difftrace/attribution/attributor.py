"""Checkpoint-replay attribution over a training run."""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np
from tqdm import tqdm

from ..diffusion.noise import monte_carlo_noise, noise_from_seed
from ..engine.loss import loss_and_grad
from ..errors import DegenerateGradientError
from ..training.records import Checkpoint, TrainingRun, TrainRecord
from ..training.trainer import replay_gradient
from .config import AttributionConfig, AttributionMethod, resolve_checkpoints, resolve_timesteps
from .gradients import (
    TestGradient,
    TrainHook,
    TrainSide,
    guided_normalize,
    test_gradient,
    training_side,
)
from .lissa import inverse_hvp_test
from .scores import InfluenceScore, ScoreTable, solve_method

logger = logging.getLogger(__name__)

R = TypeVar("R")
Mapper = Callable[[Callable[[int], np.ndarray], Iterable[int], str], list[np.ndarray]]


class Attributor:
    """Scores training samples of ``run`` against test samples.

    Each selected checkpoint stands in for every training step up to the next selected
    checkpoint; the last one covers the rest of training. Checkpoint parameters are
    read-only during scoring. Training-side sums are cached per (checkpoint, mode);
    results do not depend on ``cfg.workers``.

    Args:
        run: Training run holding dataset, checkpoints and train log.
        cfg: Attribution settings.
        train_hook: Optional transform applied to every replayed training gradient
            before it enters a score (used for synthetic scale injections).
    """

    def __init__(self, run: TrainingRun, cfg: AttributionConfig, train_hook: TrainHook | None = None):
        self.run = run
        self.cfg = cfg
        self.train_hook = train_hook
        self.checkpoints: list[Checkpoint] = resolve_checkpoints(run, cfg)
        self.timesteps = resolve_timesteps(cfg, run.schedule.T)
        steps, final_step = self.checkpoint_steps, run.checkpoints[-1].step
        self._stops = dict(zip(steps, [*steps[1:], final_step], strict=True))
        self._train_cache: dict[tuple[int, TrainSide], np.ndarray] = {}
        self._guided_cache: dict[int, np.ndarray] = {}
        self._if_scorer: InfluenceFunctionScorer | None = None

    @property
    def checkpoint_steps(self) -> list[int]:
        return [c.step for c in self.checkpoints]

    @property
    def n_train(self) -> int:
        return int(self.run.dataset.shape[0])

    def interval_stop(self, checkpoint: Checkpoint) -> int | None:
        """First step past the records ``checkpoint`` stands in for."""
        if checkpoint.step in self._stops:
            return self._stops[checkpoint.step]
        return self.run.next_checkpoint_step(checkpoint.step)

    def governed_records(self, sample_id: int, checkpoint: Checkpoint) -> list[TrainRecord]:
        return self.run.governed_records(sample_id, checkpoint, self.interval_stop(checkpoint))

    def with_timesteps(self, n_t: int) -> Attributor:
        """Same run and checkpoints with ``n_t`` test timesteps, sharing replayed training sides."""
        cfg = self.cfg.model_copy(update={"n_t": int(n_t), "timesteps": None})
        other = Attributor(self.run, cfg, self.train_hook)
        other._train_cache = self._train_cache
        other._guided_cache = self._guided_cache
        return other

    def prepare(self, method: AttributionMethod | str | None = None) -> None:
        """Replay the training side of every selected checkpoint for ``method``."""
        recipe = solve_method(method or self.cfg.method)
        for checkpoint in self.checkpoints:
            self.training_matrix(checkpoint, recipe.train_side)

    def _map(self, func: Callable[[int], R], items: Iterable[int], desc: str) -> list[R]:
        items = list(items)
        disable = not self.cfg.progress
        if self.cfg.workers == 1:
            return [func(i) for i in tqdm(items, desc=desc, disable=disable)]
        with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
            return list(tqdm(pool.map(func, items), total=len(items), desc=desc, disable=disable))

    # Test side

    def test_gradient(
        self, z_test: np.ndarray, checkpoint: Checkpoint, normalize: bool
    ) -> TestGradient:
        return test_gradient(
            z_test, checkpoint, self.cfg, normalize, spec=self.run.spec, schedule=self.run.schedule
        )

    def _replayed_test_side(
        self, sample_id: int, checkpoint: Checkpoint, normalize: bool
    ) -> np.ndarray:
        """Mean replayed gradient of the governed records, i.e. the training timestep and noise."""
        records = self.governed_records(sample_id, checkpoint)
        total = np.zeros(checkpoint.params.size, dtype=np.float64)
        for record in records:
            grad = replay_gradient(
                record, checkpoint, self.run.dataset, self.run.spec, self.run.schedule
            )
            if normalize:
                if grad.norm < self.cfg.norm_floor:
                    raise DegenerateGradientError(
                        "Replayed gradient norm below floor", where=f"step {record.step}"
                    )
                total += grad.values / grad.norm
            else:
                total += grad.values
        return total / max(len(records), 1)

    # Training side

    def training_side(
        self, sample_id: int, checkpoint: Checkpoint, mode: TrainSide, timestep: int | None = None
    ) -> np.ndarray:
        effective = None
        if mode is TrainSide.GUIDED:
            effective = float(self.guided_effective_norms(checkpoint)[sample_id])
        return training_side(
            self.run,
            sample_id,
            checkpoint,
            mode,
            norm_floor=self.cfg.norm_floor,
            effective_norm=effective,
            timestep=timestep,
            stop=self.interval_stop(checkpoint),
            hook=self.train_hook,
        )

    def training_matrix(self, checkpoint: Checkpoint, mode: TrainSide) -> np.ndarray:
        """Training-side sums of every sample at ``checkpoint``, shape ``(n_train, P)``."""
        key = (checkpoint.step, mode)
        if key not in self._train_cache:
            if mode is TrainSide.GUIDED:
                # workers only read the guided cache
                self.guided_effective_norms(checkpoint)
            rows = self._map(
                lambda i: self.training_side(i, checkpoint, mode),
                range(self.n_train),
                desc=f"Replay {mode} @ {checkpoint.step}",
            )
            self._train_cache[key] = np.stack(rows)
        return self._train_cache[key]

    def guided_timestep(self, checkpoint: Checkpoint) -> int:
        """Configured timestep, or the argmax of the mean norm profile over probe samples."""
        if self.cfg.guided_timestep is not None:
            self.run.schedule.check_timestep(self.cfg.guided_timestep)
            return self.cfg.guided_timestep
        T = self.run.schedule.T
        probes = np.unique(np.append(np.arange(1, T + 1, self.cfg.guided_probe_stride), T))
        count = min(self.cfg.guided_probe_samples, self.n_train)
        samples = np.unique(np.round(np.linspace(0, self.n_train - 1, count)).astype(int))
        mean_norms = np.zeros(probes.size)
        for sample_id in samples:
            mean_norms += self._norm_profile(int(sample_id), checkpoint, probes)
        return int(probes[int(np.argmax(mean_norms))])

    def _norm_profile(self, sample_id: int, checkpoint: Checkpoint, probes: np.ndarray) -> np.ndarray:
        record = self.run.log.nearest_record(sample_id, checkpoint.step)
        eps = noise_from_seed(record.noise_seed, self.run.spec.input_dim)
        x0 = self.run.dataset[sample_id]
        spec, schedule = self.run.spec, self.run.schedule
        return np.array(
            [
                loss_and_grad(checkpoint.params, spec, schedule, x0, int(t), eps)[1].norm
                for t in probes
            ]
        )

    def guided_effective_norms(self, checkpoint: Checkpoint) -> np.ndarray:
        if checkpoint.step not in self._guided_cache:
            t_fixed = self.guided_timestep(checkpoint)
            probe = np.array([t_fixed])
            norms = np.array(
                self._map(
                    lambda i: float(self._norm_profile(i, checkpoint, probe)[0]),
                    range(self.n_train),
                    desc=f"Guided norms @ {checkpoint.step}",
                )
            )
            factors = guided_normalize(norms, self.cfg.guided_lambda)
            self._guided_cache[checkpoint.step] = factors * norms
            logger.info("Guided normalization at step %d uses t=%d", checkpoint.step, t_fixed)
        return self._guided_cache[checkpoint.step]

    # Pairwise scores

    def tracin_at_t(self, z: int, z_test: np.ndarray, t: int) -> float:
        """TracIn at a single test timestep, averaged over ``m`` noises."""
        spec, schedule = self.run.spec, self.run.schedule
        total = 0.0
        for checkpoint in self.checkpoints:
            train_vector = self.training_side(z, checkpoint, TrainSide.RAW)
            for i in range(self.cfg.m):
                eps = monte_carlo_noise(self.cfg.noise_seed, t, i, spec.input_dim)
                _, grad = loss_and_grad(checkpoint.params, spec, schedule, z_test, t, eps)
                total += grad.dot(train_vector)
        return total / self.cfg.m

    def score(
        self, z: int, z_test: np.ndarray, method: AttributionMethod | str, test_id: int = -1
    ) -> InfluenceScore:
        recipe = solve_method(method)
        terms = [
            self.test_gradient(z_test, checkpoint, recipe.normalize_test).vector.dot(
                self.training_side(z, checkpoint, recipe.train_side)
            )
            for checkpoint in self.checkpoints
        ]
        return InfluenceScore.from_terms(z, test_id, np.array(terms))

    def diffusion_tracin(self, z: int, z_test: np.ndarray, test_id: int = -1) -> InfluenceScore:
        return self.score(z, z_test, AttributionMethod.TRACIN, test_id)

    def diffusion_retrac(self, z: int, z_test: np.ndarray, test_id: int = -1) -> InfluenceScore:
        return self.score(z, z_test, AttributionMethod.RETRAC, test_id)

    def guided(self, z: int, z_test: np.ndarray, test_id: int = -1) -> InfluenceScore:
        return self.score(z, z_test, AttributionMethod.GUIDED, test_id)

    def self_influence(
        self,
        z: int,
        method: AttributionMethod | str | None = None,
        replay_test_side: bool = False,
    ) -> InfluenceScore:
        """Influence of ``z`` on itself.

        With ``replay_test_side`` the test side uses the training timestep and noise of
        the replayed records instead of the timestep/noise expectation.
        """
        recipe = solve_method(method or self.cfg.method)
        terms = []
        for checkpoint in self.checkpoints:
            if replay_test_side:
                test_side = self._replayed_test_side(z, checkpoint, recipe.normalize_test)
            else:
                test_side = self.test_gradient(
                    self.run.dataset[z], checkpoint, recipe.normalize_test
                ).vector.values
            terms.append(float(np.dot(test_side, self.training_side(z, checkpoint, recipe.train_side))))
        return InfluenceScore.from_terms(z, z, np.array(terms))

    # Bulk scores

    def score_all(
        self,
        tests: np.ndarray,
        test_ids: Sequence[int] | None = None,
        method: AttributionMethod | str | None = None,
    ) -> ScoreTable:
        """Score every training sample against every test, checkpoint by checkpoint."""
        method = AttributionMethod(method or self.cfg.method)
        tests = np.atleast_2d(np.asarray(tests, dtype=np.float64))
        test_ids = list(range(len(tests))) if test_ids is None else list(test_ids)
        if method is AttributionMethod.INFLUENCE_FUNCTION:
            return self._influence_function_table(tests, test_ids)

        recipe = solve_method(method)
        per_checkpoint = np.zeros((len(tests), self.n_train, len(self.checkpoints)))
        for c_index, checkpoint in enumerate(self.checkpoints):
            train_matrix = self.training_matrix(checkpoint, recipe.train_side)
            for row, z_test in enumerate(tests):
                test_vector = self.test_gradient(z_test, checkpoint, recipe.normalize_test).vector
                per_checkpoint[row, :, c_index] = train_matrix @ test_vector.values
            logger.info("Scored %d tests at checkpoint %d (%s)", len(tests), checkpoint.step, method)
        steps = self.checkpoint_steps
        return ScoreTable(method, test_ids, steps, per_checkpoint, self.metadata(method))

    def self_influence_all(
        self, method: AttributionMethod | str | None = None, replay_test_side: bool = False
    ) -> list[InfluenceScore]:
        return self._map(
            lambda i: self.self_influence(i, method, replay_test_side),
            range(self.n_train),
            desc="Self-influence",
        )

    def influence_checkpoint(self) -> Checkpoint:
        """Checkpoint used by the influence-function baseline: the last selected one, else the final."""
        if self.cfg.checkpoints:
            return self.checkpoints[-1]
        return self.run.checkpoints[-1]

    def _influence_function_table(self, tests: np.ndarray, test_ids: list[int]) -> ScoreTable:
        if self._if_scorer is None:
            checkpoint = self.influence_checkpoint()
            self._if_scorer = InfluenceFunctionScorer(self.run, self.cfg, checkpoint, self._map)
        scores = np.stack([self._if_scorer.ranking_scores(z_test) for z_test in tests])
        method = AttributionMethod.INFLUENCE_FUNCTION
        steps = [self._if_scorer.checkpoint.step]
        return ScoreTable(method, test_ids, steps, scores[:, :, None], self.metadata(method, steps))

    def metadata(self, method: AttributionMethod, checkpoint_steps: list[int] | None = None) -> dict:
        meta = {
            "method": str(method),
            "checkpoints": checkpoint_steps or self.checkpoint_steps,
            "timesteps": [int(t) for t in self.timesteps],
            "n_t": len(self.timesteps),
            "m": self.cfg.m,
            "noise_seed": self.cfg.noise_seed,
            "norm_floor": self.cfg.norm_floor,
        }
        if method is AttributionMethod.GUIDED:
            meta["guided_lambda"] = self.cfg.guided_lambda
        if method is AttributionMethod.INFLUENCE_FUNCTION:
            meta["lissa"] = self.cfg.lissa.model_dump()
            meta["orientation"] = "score = -influence_function (positive = proponent)"
        return meta


class InfluenceFunctionScorer:
    """Influence-function baseline over every training sample at one checkpoint.

    Expected training gradients are computed once; each test costs one LiSSA solve.
    Ranking scores are ``-influence_function`` so that proponents rank first.
    """

    def __init__(
        self,
        run: TrainingRun,
        cfg: AttributionConfig,
        checkpoint: Checkpoint,
        mapper: Mapper | None = None,
    ):
        self.run = run
        self.cfg = cfg
        self.checkpoint = checkpoint
        self._mapper = mapper or (lambda func, items, desc: [func(i) for i in items])
        self._train_matrix: np.ndarray | None = None

    @property
    def train_matrix(self) -> np.ndarray:
        if self._train_matrix is None:
            run, checkpoint = self.run, self.checkpoint
            rows = self._mapper(
                lambda i: test_gradient(
                    run.dataset[i], checkpoint, self.cfg, False, spec=run.spec, schedule=run.schedule
                ).vector.values,
                range(run.dataset.shape[0]),
                f"Expected gradients @ {checkpoint.step}",
            )
            self._train_matrix = np.stack(rows)
        return self._train_matrix

    def ranking_scores(self, z_test: np.ndarray) -> np.ndarray:
        s_test = inverse_hvp_test(self.run, z_test, self.checkpoint, self.cfg)
        return self.train_matrix @ s_test

    def influence(self, sample_id: int, z_test: np.ndarray) -> float:
        return -float(self.ranking_scores(z_test)[sample_id])
