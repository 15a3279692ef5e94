# SPDX-License-Identifier: Apache-2.0
"""Dataset ingestion and metrics for the benchmarks.
1. load_daisy: Parse a DAISY-style numeric text file into input/output columns.
2. split_halves: First half for training, second half for testing.
3. standardize: Zero-mean unit-variance scaling from training statistics.
4. rmse: Root mean squared error over all channels and steps.
"""

import logging
import os
import re
from dataclasses import dataclass
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

import numpy as np
import pandas as pd

from rgpssm.utils.errors import DatasetError
from rgpssm.utils.errors import DimensionError

logger = logging.getLogger(__name__)

_SEPARATOR = re.compile(r"[,\s]+")


@dataclass(frozen=True)
class DaisyPreset:
    filename: str
    input_cols: Tuple[int, ...]
    output_col: int
    description: str


DAISY_PRESETS: Dict[str, DaisyPreset] = {
    "actuator": DaisyPreset("robot_arm.dat", (0,), 1, "Hydraulic actuator: valve opening -> oil pressure"),
    "ballbeam": DaisyPreset("ballbeam.dat", (0,), 1, "Ball and beam: beam angle -> ball position"),
    "drive": DaisyPreset("drive.dat", (0,), 1, "Coupled electric drives: voltage -> pulley speed"),
    "dryer": DaisyPreset("dryer.dat", (0,), 1, "Hair dryer: heater voltage -> air temperature"),
    "gasfurnace": DaisyPreset("gas_furnace.dat", (0,), 1, "Gas furnace: gas flow rate -> CO2 concentration"),
}


@dataclass
class SysIdData:
    u: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return self.y.shape[0]

    def to_frame(self) -> pd.DataFrame:
        columns = {f"u{i + 1}": self.u[:, i] for i in range(self.u.shape[1])}
        columns["y1"] = self.y
        return pd.DataFrame(columns)


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    scale: np.ndarray

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.scale

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return values * self.scale + self.mean


def resolve_preset(name: str, data_dir: Optional[str] = None) -> Tuple[str, List[int], int]:
    """Path, input columns and output column of a named DAISY dataset."""
    try:
        preset = DAISY_PRESETS[name]
    except KeyError as e:
        raise DatasetError(f"unknown dataset '{name}', expected one of {', '.join(DAISY_PRESETS)}") from e
    return os.path.join(data_dir or "", preset.filename), list(preset.input_cols), preset.output_col


def load_daisy(path: str, input_cols: Sequence[int], output_col: int) -> SysIdData:
    """Parse whitespace- or comma-delimited numbers; lines starting with # or % are comments."""
    rows = []
    width = None
    try:
        with open(path, "r", encoding="utf-8") as stream:
            lines = stream.readlines()
    except OSError as e:
        raise DatasetError(f"cannot read {path}: {e}") from e
    for number, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text[0] in "#%":
            continue
        fields = [f for f in _SEPARATOR.split(text) if f]
        try:
            values = [float(f) for f in fields]
        except ValueError as e:
            raise DatasetError(f"non-numeric value in '{text[:40]}'", line=number) from e
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DatasetError(f"expected {width} columns, found {len(values)}", line=number)
        rows.append(values)
    if not rows:
        raise DatasetError(f"{path} holds no data rows")
    frame = pd.DataFrame(rows)
    needed = list(input_cols) + [output_col]
    if any(c >= width or c < -width for c in needed):
        raise DatasetError(f"columns {needed} requested from a file with {width} columns")
    logger.info("Loaded %d samples with %d columns from %s", len(frame), width, path)
    return SysIdData(frame.iloc[:, list(input_cols)].to_numpy(dtype=float), frame.iloc[:, output_col].to_numpy(dtype=float))


def split_halves(data: SysIdData) -> Tuple[SysIdData, SysIdData]:
    half = len(data) // 2
    return SysIdData(data.u[:half], data.y[:half]), SysIdData(data.u[half:], data.y[half:])


def _scaler(values: np.ndarray, name: str) -> Scaler:
    mean = values.mean(axis=0)
    scale = values.std(axis=0)
    scale = np.atleast_1d(scale).astype(float)
    flat = scale <= 0
    if np.any(flat):
        logger.warning("Constant %s channel(s) %s, using scale 1", name, np.flatnonzero(flat).tolist())
        scale[flat] = 1.0
    return Scaler(mean, scale if np.ndim(values) > 1 else float(scale[0]))


def standardize(train: SysIdData, test: SysIdData) -> Tuple[SysIdData, SysIdData, Dict[str, Scaler]]:
    scalers = {"u": _scaler(train.u, "input"), "y": _scaler(train.y, "output")}

    def apply(data: SysIdData) -> SysIdData:
        return SysIdData(scalers["u"].transform(data.u), scalers["y"].transform(data.y))

    return apply(train), apply(test), scalers


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise DimensionError(f"prediction shape {pred.shape} does not match truth {truth.shape}")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))
