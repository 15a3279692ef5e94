# SPDX-License-Identifier: Apache-2.0
"""Configuration parsing: files, environment variables and overrides."""

import io
import math

import pytest

from rgpssm.utils.common import get_config
from rgpssm.utils.common import with_overrides
from rgpssm.utils.configuration import ExperimentConfig
from rgpssm.utils.configuration import FilterConfig
from rgpssm.utils.configuration_wizard import parse_flat_text
from rgpssm.utils.configuration_wizard import read_config_text
from rgpssm.utils.errors import ConfigurationError


class TestDefaults:
    def test_defaults(self):
        config = get_config()
        assert config.task == "wingrock"
        assert config.filter.budget == 20
        assert config.filter.novelty_threshold == 1e-4
        assert config.filter.hyperopt.enabled
        assert config.kernel.length_scales == [1.0]
        assert config.measurement_noise is None

    def test_infinite_threshold_freezes_the_set(self):
        assert not FilterConfig(novelty_threshold=math.inf).adds_points
        assert FilterConfig().adds_points


class TestSources:
    def test_camel_case_mapping(self):
        config = ExperimentConfig.from_dict({"trainSteps": 7, "filter": {"noveltyThreshold": 0.01, "hyperopt": {"maxLogStep": 0.2}}})
        assert config.train_steps == 7
        assert config.filter.novelty_threshold == 0.01
        assert config.filter.hyperopt.max_log_step == 0.2

    def test_environment_overrides_the_data(self, monkeypatch):
        monkeypatch.setenv("RGPSSM_SEED", "5")
        monkeypatch.setenv("RGPSSM_FILTER_BUDGET", "7")
        config = ExperimentConfig.from_dict({"seed": 1})
        assert config.seed == 5
        assert config.filter.budget == 7

    def test_overrides_beat_the_environment(self, monkeypatch):
        monkeypatch.setenv("RGPSSM_SEED", "5")
        assert ExperimentConfig.from_dict({}, {"seed": 9}).seed == 9

    def test_flat_file(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("task = lincycle  # limit cycle\nfilter.budget = 12\nfilter.novelty_threshold = 0.001\n")
        config = get_config(str(path))
        assert config.task == "lincycle"
        assert config.filter.budget == 12
        assert config.filter.novelty_threshold == 0.001

    def test_yaml_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("task: sysid\ndatasetName: dryer\nkernel:\n  lengthScales: [0.5, 2.0]\n")
        config = get_config(str(path), {"seed": 3})
        assert config.dataset_name == "dryer"
        assert config.kernel.length_scales == [0.5, 2.0]
        assert config.seed == 3

    def test_json_file_from_the_environment(self, tmp_path, monkeypatch):
        path = tmp_path / "run.json"
        path.write_text('{"task": "gprcheck", "runs": 3}')
        monkeypatch.setenv("RGPSSM_CONFIG_FILE", str(path))
        config = get_config()
        assert (config.task, config.runs) == ("gprcheck", 3)

    def test_with_overrides_keeps_other_keys(self):
        config = ExperimentConfig.from_dict({"task": "lincycle", "trainSteps": 40})
        changed = with_overrides(config, {"filter": {"budget": 3}})
        assert changed.train_steps == 40
        assert changed.filter.budget == 3
        assert config.filter.budget == 20


class TestRoundTrip:
    def test_dump_uses_camel_case_keys(self):
        dumped = ExperimentConfig.from_dict({"task": "lincycle", "trainSteps": 40}).to_dict()
        assert dumped["trainSteps"] == 40
        assert dumped["filter"]["noveltyThreshold"] == 1e-4
        assert dumped["filter"]["hyperopt"]["maxLogStep"] == 0.1
        assert not any("-" in key for key in dumped)

    def test_dumped_config_loads_back(self):
        config = ExperimentConfig.from_dict({
            "task": "sysid",
            "trainSteps": 40,
            "forecastSteps": 7,
            "processNoise": 1e-3,
            "datasetName": "dryer",
            "filter": {"budget": 9, "hyperopt": {"learningRate": 0.05}},
            "kernel": {"lengthScales": [0.5, 2.0]},
        })
        assert ExperimentConfig.from_dict(config.to_dict()) == config

    def test_process_noise_defaults_to_the_task(self):
        assert get_config().process_noise is None


class TestErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            get_config(str(tmp_path / "absent.yaml"))

    def test_non_mapping_data(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict(["task"])

    def test_unparseable_text(self):
        with pytest.raises(ValueError):
            read_config_text(io.StringIO("[1, 2]\nnot a key line\n"))

    def test_flat_line_errors_name_the_line(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_flat_text("seed = 1\n???\n")


class TestHelp:
    def test_help_lists_environment_variables(self):
        lines = []
        ExperimentConfig.print_help(lines.append)
        text = "".join(lines)
        assert "RGPSSM_SEED" in text
        assert "RGPSSM_FILTER_BUDGET" in text
        assert "RGPSSM_FILTER_HYPEROPT_LEARNINGRATE" in text
        assert "RGPSSM_FILTER\n" not in text

    def test_envvars_point_at_nested_keys(self):
        paths = {name: path for name, path, _ in ExperimentConfig.envvars()}
        assert paths["RGPSSM_KERNEL_LENGTHSCALES"] == ("kernel", "lengthScales")
