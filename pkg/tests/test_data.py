# SPDX-License-Identifier: Apache-2.0
"""DAISY parsing, scaling and metrics."""

import numpy as np
import pytest

from rgpssm.bench.data import SysIdData
from rgpssm.bench.data import load_daisy
from rgpssm.bench.data import resolve_preset
from rgpssm.bench.data import rmse
from rgpssm.bench.data import split_halves
from rgpssm.bench.data import standardize
from rgpssm.utils.errors import DatasetError
from rgpssm.utils.errors import DimensionError


@pytest.fixture
def daisy_file(tmp_path):
    path = tmp_path / "plant.dat"
    path.write_text("% plant data\n# u y\n0.5 1.0\n\n1.5,2.0\n2.5  3.0\n3.5\t4.0\n")
    return path


class TestLoadDaisy:
    def test_parses_mixed_separators_and_comments(self, daisy_file):
        data = load_daisy(str(daisy_file), [0], 1)
        assert len(data) == 4
        np.testing.assert_array_equal(data.u[:, 0], [0.5, 1.5, 2.5, 3.5])
        np.testing.assert_array_equal(data.y, [1.0, 2.0, 3.0, 4.0])

    def test_negative_output_column(self, daisy_file):
        np.testing.assert_array_equal(load_daisy(str(daisy_file), [0], -1).y, [1.0, 2.0, 3.0, 4.0])

    def test_reports_the_offending_line(self, tmp_path):
        path = tmp_path / "bad.dat"
        path.write_text("1 2\n3 four\n")
        with pytest.raises(DatasetError) as info:
            load_daisy(str(path), [0], 1)
        assert info.value.line == 2

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "ragged.dat"
        path.write_text("1 2\n3 4 5\n")
        with pytest.raises(DatasetError) as info:
            load_daisy(str(path), [0], 1)
        assert info.value.line == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError):
            load_daisy(str(tmp_path / "absent.dat"), [0], 1)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.dat"
        path.write_text("# nothing\n")
        with pytest.raises(DatasetError):
            load_daisy(str(path), [0], 1)

    def test_column_out_of_range(self, daisy_file):
        with pytest.raises(DatasetError):
            load_daisy(str(daisy_file), [0], 2)


class TestPreprocessing:
    def test_split_halves(self):
        data = SysIdData(np.arange(10.0).reshape(5, 2), np.arange(5.0))
        train, test = split_halves(data)
        assert (len(train), len(test)) == (2, 3)
        np.testing.assert_array_equal(test.y, [2.0, 3.0, 4.0])

    def test_standardize_uses_training_statistics(self):
        train = SysIdData(np.array([[0.0], [2.0]]), np.array([1.0, 3.0]))
        test = SysIdData(np.array([[4.0]]), np.array([5.0]))
        train_s, test_s, scalers = standardize(train, test)
        np.testing.assert_allclose(train_s.y, [-1.0, 1.0])
        np.testing.assert_allclose(test_s.u, [[3.0]])
        np.testing.assert_allclose(scalers["y"].inverse(test_s.y), test.y)

    def test_constant_channel_keeps_unit_scale(self, caplog):
        train = SysIdData(np.ones((4, 1)), np.arange(4.0))
        with caplog.at_level("WARNING"):
            train_s, _, _ = standardize(train, train)
        np.testing.assert_array_equal(train_s.u, 0.0)
        assert "Constant input" in caplog.text

    def test_rmse(self):
        assert rmse([1.0, 2.0], [1.0, 4.0]) == pytest.approx(np.sqrt(2.0))
        with pytest.raises(DimensionError):
            rmse(np.zeros(2), np.zeros(3))


class TestPresets:
    def test_known_preset(self, tmp_path):
        path, inputs, output = resolve_preset("dryer", str(tmp_path))
        assert path == str(tmp_path / "dryer.dat")
        assert inputs == [0] and output == 1

    def test_unknown_preset(self):
        with pytest.raises(DatasetError):
            resolve_preset("unknown")
