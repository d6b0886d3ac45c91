"""Link defect detections across overlapping inspection images."""

import json

from ._defectchain import (
    ConfigError,
    DataError,
    Error,
    build_chains,
    chain_metrics,
    combined_similarity,
    default_config,
    extract_features,
    hamming,
    match_descriptors,
    pairwise_metrics,
    read_pgm,
    synth,
)
from ._defectchain import run as _run

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "build_chains",
    "chain_metrics",
    "combined_similarity",
    "default_config",
    "extract_features",
    "hamming",
    "match_descriptors",
    "pairwise_metrics",
    "read_pgm",
    "run",
    "synth",
]


def run(manifest, config=None, cache_dir=None, out=None):
    """Run the pipeline on a manifest and return the report as a dict.

    `config` may be a dict or JSON text; missing keys keep their defaults.
    """
    if isinstance(config, dict):
        config = json.dumps(config)
    return json.loads(_run(str(manifest), config or "", cache_dir, out))
