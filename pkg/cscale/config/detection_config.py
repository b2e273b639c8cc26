# Copyright 2025 The cscale Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Detection configuration for continuity-scaling runs
Validated run parameters, presets, and the key=value config-file layer
"""

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, field_validator

logger = logging.getLogger(__name__)


class EmbeddingOverride(BaseModel):
    """Explicit delay-embedding parameters for one series."""

    model_config = ConfigDict(frozen=True)

    dimension: int = Field(ge=1)
    lag: int = Field(ge=1)


class SurrogateConfig(BaseModel):
    """Segment-shuffle surrogate test parameters."""

    model_config = ConfigDict(frozen=True)

    n_segments: int = Field(default=25, ge=1)
    n_replicates: int = Field(default=20, ge=1)
    master_seed: int = Field(default=0, ge=0, lt=2 ** 64)


class DetectionConfig(BaseModel):
    """
    Everything a pairwise or network detection run depends on.

    `theiler=None` resolves to one embedding window of the effect series and
    `dd_condition=None` switches the predecessor restriction on only when both series
    enter undelayed (dimension 1).
    """

    model_config = ConfigDict(frozen=True)

    # epsilon grid
    e: float = Field(default=0.001, gt=0.0, lt=1.0)
    n_eps: int = Field(default=33, ge=3)

    # neighbourhood
    theiler: Optional[int] = Field(default=None, ge=0)
    dd_condition: Optional[bool] = None

    # significance
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    surrogates: SurrogateConfig = SurrogateConfig()

    # embedding (explicit overrides win over auto-selection)
    embedding: Dict[str, EmbeddingOverride] = Field(default_factory=dict)
    default_embedding: Optional[EmbeddingOverride] = None
    max_lag: int = Field(default=20, ge=1)
    max_dim: int = Field(default=10, ge=2)
    mi_bins: Optional[int] = Field(default=None, ge=2)
    fnn_rtol: float = Field(default=10.0, gt=0.0)
    fnn_atol: float = Field(default=2.0, gt=0.0)

    # execution
    threads: int = Field(default=1, ge=1)

    @field_validator("embedding")
    @classmethod
    def _labels_not_blank(cls, value: Dict[str, EmbeddingOverride]) -> Dict[str, EmbeddingOverride]:
        for label in value:
            if not label.strip():
                raise ValueError("embedding override labels must be non-empty")
        return value

    def embedding_for(self, label: str) -> Optional[EmbeddingOverride]:
        """Override for `label`, falling back to the run-wide default."""
        return self.embedding.get(label, self.default_embedding)


# Preset configurations for the benchmark systems
PRESETS: Dict[str, Dict[str, Any]] = {
    "logistic": {
        "embed-dim": 3,
        "embed-lag": 1,
    },

    "lorenz": {
        "embed-dim": 7,
        # lag is in samples; 1 sample at omega=0.05 matches tau ~ 0.05
        "embed-lag": 1,
    },

    "direct": {
        # the observed variables are the states themselves
        "embed-dim": 1,
        "embed-lag": 1,
        "dd": True,
    },
}


def load_preset(preset_name: str) -> Dict[str, Any]:
    """
    Load a preset configuration

    Args:
        preset_name: Name of the preset to load

    Returns:
        Dictionary of flag values
    """
    if preset_name not in PRESETS:
        raise ValueError(f"Unknown preset: {preset_name}. Available: {list(PRESETS.keys())}")

    return PRESETS[preset_name].copy()


def _normalise_key(key: str) -> str:
    return key.strip().lower().replace("_", "-")


def load_config_file(path: str) -> Dict[str, str]:
    """
    Read a key=value config file.

    Keys are long flag names; '-' and '_' are interchangeable.

    Args:
        path: Path to the config file

    Returns:
        Dictionary of normalised flag name -> raw string value
    """
    config_path = Path(path)
    if not config_path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")

    raw = dotenv_values(config_path)
    values = {_normalise_key(k): v for k, v in raw.items() if v is not None}
    logger.info(f"Loaded {len(values)} settings from config file {path}")
    return values


def _as_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def build_detection_config(flags: Mapping[str, Any]) -> DetectionConfig:
    """
    Build a DetectionConfig from a flat mapping of flag names to values.

    Values may be raw strings (config file) or already-typed (argparse).
    Unknown keys are ignored so the same mapping can carry I/O flags.

    Args:
        flags: Merged flag values, highest precedence already applied

    Returns:
        Validated DetectionConfig
    """
    flat = {_normalise_key(k): v for k, v in flags.items() if v is not None}

    kwargs: Dict[str, Any] = {}
    if "eps-shrink" in flat:
        kwargs["e"] = float(flat["eps-shrink"])
    if "eps-count" in flat:
        kwargs["n_eps"] = int(flat["eps-count"])
    if "theiler" in flat:
        kwargs["theiler"] = int(flat["theiler"])
    if "dd" in flat:
        kwargs["dd_condition"] = _as_bool(flat["dd"])
    if "alpha" in flat:
        kwargs["alpha"] = float(flat["alpha"])
    if "max-lag" in flat:
        kwargs["max_lag"] = int(flat["max-lag"])
    if "max-dim" in flat:
        kwargs["max_dim"] = int(flat["max-dim"])
    if "mi-bins" in flat:
        kwargs["mi_bins"] = int(flat["mi-bins"])
    if "fnn-rtol" in flat:
        kwargs["fnn_rtol"] = float(flat["fnn-rtol"])
    if "fnn-atol" in flat:
        kwargs["fnn_atol"] = float(flat["fnn-atol"])
    if "threads" in flat:
        kwargs["threads"] = int(flat["threads"])

    surrogate_kwargs: Dict[str, Any] = {}
    if "segments" in flat:
        surrogate_kwargs["n_segments"] = int(flat["segments"])
    if "replicates" in flat:
        surrogate_kwargs["n_replicates"] = int(flat["replicates"])
    if "seed" in flat:
        surrogate_kwargs["master_seed"] = int(flat["seed"])
    kwargs["surrogates"] = SurrogateConfig(**surrogate_kwargs)

    has_dim = "embed-dim" in flat
    has_lag = "embed-lag" in flat
    if has_dim != has_lag:
        raise ValueError("--embed-dim and --embed-lag must be given together")
    if has_dim:
        kwargs["default_embedding"] = EmbeddingOverride(
            dimension=int(flat["embed-dim"]), lag=int(flat["embed-lag"])
        )

    return DetectionConfig(**kwargs)

