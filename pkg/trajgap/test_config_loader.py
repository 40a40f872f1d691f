"""
Unit tests for the run configuration loader.
"""

import pytest
import yaml

from cf_models import MODEL_TAGS
from config_loader import CONFIG_ENV_VAR, RunConfig, load_run_config
from errors import InvalidInputError


@pytest.fixture(autouse=True)
def no_env_config(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


class TestLoading:
    """Tests for configuration sources."""

    def test_built_in_defaults(self):
        config = RunConfig()

        assert config.config_path is None
        assert config.get_seed() == 0
        assert config.get_models() == list(MODEL_TAGS)
        assert config.get_ga_config().expected_evaluations == 1020

    def test_file_merged_over_defaults(self, tmp_path):
        path = write_yaml(tmp_path / 'run.yml', {'seed': 7, 'ga': {'population': 10}})

        config = RunConfig(path)

        ga = config.get_ga_config()
        assert config.get_seed() == 7
        assert ga.population == 10
        assert ga.generations == 50
        assert ga.seed == 7

    def test_environment_variable(self, tmp_path, monkeypatch):
        path = write_yaml(tmp_path / 'env.yml', {'dataset': 'lidar'})
        monkeypatch.setenv(CONFIG_ENV_VAR, path)

        assert load_run_config().get_dataset() == 'lidar'

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            RunConfig(str(tmp_path / 'absent.yml'))

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / 'bad.yml'
        path.write_text("ga: [unclosed\n")

        with pytest.raises(ValueError):
            RunConfig(str(path))

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / 'list.yml'
        path.write_text("- 1\n- 2\n")

        with pytest.raises(ValueError):
            RunConfig(str(path))


class TestAccessors:
    """Tests for typed accessors and overrides."""

    def test_dot_path_lookup(self):
        config = RunConfig()

        assert config.get('ga.crossover_rate') == 0.7
        assert config.get('ga.missing', 'fallback') == 'fallback'
        assert config.get('seed.nested', 3) == 3

    def test_overrides_skip_none(self):
        config = RunConfig()

        config.apply_overrides({'seed': 11, 'ga.population': None, 'reconstruction.slope_threshold': 0.2})

        assert config.get_seed() == 11
        assert config.get('ga.population') == 20
        assert config.get_reconstruction_config().slope_threshold == 0.2

    def test_model_selection(self):
        config = RunConfig()

        config.set('model', 'best-of-all')
        assert config.get_models() == ['best-of-all']
        config.set('model', 'newell')
        assert config.get_models() == ['newell']
        config.set('model', 'krauss')
        with pytest.raises(InvalidInputError):
            config.get_models()

    def test_reconstruction_model(self):
        config = RunConfig()

        assert config.get_reconstruction_config().model == 'gipps'
        assert config.get_reconstruction_config('idm').model == 'idm'

    def test_partial_bounds_override(self, tmp_path):
        path = write_yaml(tmp_path / 'b.yml', {'bounds': {'newell': {'tau': [0.5, 2.0]}}})

        bounds = RunConfig(path).get_bounds('newell')

        assert bounds == {'tau': (0.5, 2.0), 'd': (0.5, 15.0)}

    def test_bounds_validated(self):
        config = RunConfig()

        config.set('bounds.pipes.T', [3.0])
        with pytest.raises(InvalidInputError):
            config.get_bounds('pipes')
        config.set('bounds.pipes.T', [3.0, 1.0])
        with pytest.raises(InvalidInputError):
            config.get_bounds('pipes')

    def test_all_bounds(self):
        assert set(RunConfig().get_bounds()) == set(MODEL_TAGS)

    def test_component_configs(self):
        config = RunConfig()

        assert config.get_filter_config().cluster_radius == 0.7
        assert config.get_extraction_rules().excluded_lanes == (1,)
        assert config.get_gap_synthesis()['count'] == 112

    def test_jobs_at_least_one(self):
        config = RunConfig()
        config.set('jobs', 0)

        assert config.get_jobs() == 1


class TestOutput:

    def test_effective_config_reloads(self, tmp_path):
        config = RunConfig()
        config.apply_overrides({'seed': 5, 'model': 'pipes'})
        target = str(tmp_path / 'out' / 'run_config.yml')

        config.write_effective(target)

        assert RunConfig(target).to_dict() == config.to_dict()

    def test_summary_printed(self, capsys):
        RunConfig().print_config_summary()

        out = capsys.readouterr().out
        assert 'Configuration Summary' in out
        assert 'built-in defaults' in out
