from .analyses import ANALYSIS_REGISTRY, solve_analysis
from .commands import (
    COMMAND_REGISTRY,
    AnalyzeCommand,
    AttributeCommand,
    BaseCommand,
    MakeDataCommand,
    RunCommand,
    SelfInfluenceCommand,
    TrainCommand,
    solve_command,
)
from .config import (
    AnalyzeCommandConfig,
    AttributeCommandConfig,
    MakeDataConfig,
    ModelConfig,
    SampleSource,
    SelfInfluenceCommandConfig,
    TestsConfig,
    TrainCommandConfig,
    load_config,
)
from .main import main

__all__ = [
    "ANALYSIS_REGISTRY",
    "solve_analysis",
    "COMMAND_REGISTRY",
    "BaseCommand",
    "RunCommand",
    "MakeDataCommand",
    "TrainCommand",
    "AttributeCommand",
    "SelfInfluenceCommand",
    "AnalyzeCommand",
    "solve_command",
    "ModelConfig",
    "SampleSource",
    "TestsConfig",
    "MakeDataConfig",
    "TrainCommandConfig",
    "AttributeCommandConfig",
    "SelfInfluenceCommandConfig",
    "AnalyzeCommandConfig",
    "load_config",
    "main",
]
