# SPDX-License-Identifier: Apache-2.0
"""Utility functions used across rgpssm.
1. configure_logging: Set up root logging from a level name or the LOGLEVEL variable.
2. get_config: Parse the experiment configuration from a file, the environment and overrides.
3. with_overrides: Return a copy of a configuration with some keys replaced.
"""

import logging
import os
from typing import Any
from typing import Dict
from typing import Optional

from rgpssm.utils.configuration import ExperimentConfig

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """Configure the root logger once; `level` wins over the LOGLEVEL environment variable."""
    level = (level or os.environ.get("LOGLEVEL", "INFO")).upper()
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)


def get_config(config_file: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Parse the experiment configuration.

    The file defaults to the RGPSSM_CONFIG_FILE environment variable; without a file the
    defaults plus environment variables are used. `overrides` is a nested camelCase mapping
    applied last (the CLI flags).
    """
    config_file = config_file or os.environ.get("RGPSSM_CONFIG_FILE")
    if config_file:
        logger.debug("Reading configuration from %s", config_file)
        return ExperimentConfig.from_file(config_file, overrides)
    return ExperimentConfig.from_dict({}, overrides)


def with_overrides(config: ExperimentConfig, overrides: Dict[str, Any]) -> ExperimentConfig:
    """Return a new configuration with `overrides` merged over `config`."""
    return ExperimentConfig.from_dict(config.to_dict(), overrides)

