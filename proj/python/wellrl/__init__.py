"""Python access to the wellrl reservoir environment, trainers and pipeline stages."""

from ._wellrl import (
    ConfigError,
    NumericalError,
    ReservoirProblem,
    WellEnv,
    accounting,
    base_return,
    benchmark,
    classical_mds,
    cluster,
    compute_gae,
    de_optimize,
    evaluate,
    git_blob_sha1,
    kmeans,
    load_config,
    preset_names,
    report,
    sample,
    sequence_return,
    train,
)

__all__ = [
    "ConfigError",
    "NumericalError",
    "ReservoirProblem",
    "WellEnv",
    "accounting",
    "base_return",
    "benchmark",
    "classical_mds",
    "cluster",
    "compute_gae",
    "de_optimize",
    "evaluate",
    "git_blob_sha1",
    "kmeans",
    "load_config",
    "preset_names",
    "report",
    "sample",
    "sequence_return",
    "train",
]
