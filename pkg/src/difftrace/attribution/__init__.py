from .attributor import Attributor, InfluenceFunctionScorer
from .config import (
    AttributionConfig,
    AttributionMethod,
    LissaConfig,
    expectation_timesteps,
    resolve_checkpoints,
    resolve_timesteps,
    select_checkpoints,
)
from .gradients import (
    TestGradient,
    TrainHook,
    TrainSide,
    guided_normalize,
    test_gradient,
    training_side,
)
from .lissa import influence_function, inverse_hvp_test, lissa_inverse_hvp, training_hvp
from .scores import METHOD_REGISTRY, InfluenceScore, MethodRecipe, ScoreTable, rank_ids, solve_method
from .timing import TimingRow, time_attribution

__all__ = [
    "Attributor",
    "InfluenceFunctionScorer",
    "AttributionConfig",
    "AttributionMethod",
    "LissaConfig",
    "expectation_timesteps",
    "resolve_checkpoints",
    "resolve_timesteps",
    "select_checkpoints",
    "TestGradient",
    "TrainHook",
    "TrainSide",
    "guided_normalize",
    "test_gradient",
    "training_side",
    "influence_function",
    "inverse_hvp_test",
    "lissa_inverse_hvp",
    "training_hvp",
    "METHOD_REGISTRY",
    "InfluenceScore",
    "MethodRecipe",
    "ScoreTable",
    "rank_ids",
    "solve_method",
    "TimingRow",
    "time_attribution",
]
