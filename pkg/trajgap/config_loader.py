#!/usr/bin/env python3
"""
Configuration loader for reconstruction runs
This module provides utilities to load and access run configuration from YAML files
"""

import copy
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import yaml

from calibration import GaConfig
from cf_models import BEST_OF_ALL, DEFAULT_BOUNDS, MODEL_TAGS, ModelFactory
from errors import InvalidInputError
from ngsim_ingest import ExtractionRules
from reconstruction import ReconstructionConfig
from scan_extract import FilterConfig

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = 'TRAJGAP_CONFIG'
ALL_MODELS = 'all'

DEFAULTS: Dict[str, Any] = {
    'seed': 0,
    'dataset': 'ngsim',
    'model': ALL_MODELS,
    'jobs': 1,
    'ga': {
        'population': 20,
        'generations': 50,
        'crossover_rate': 0.7,
        'mutation_rate': 0.1,
        'elitism': 1,
        'mutation_scale': 0.1,
    },
    'bounds': {tag: {name: list(rng) for name, rng in b.items()} for tag, b in DEFAULT_BOUNDS.items()},
    'reconstruction': {
        'short_gap_limit': 5.0,
        'context_length': 5.0,
        'slope_threshold': 0.5,
        'blend_schedule': 'linear',
        'leader_speed': 'follower',
    },
    'scan_filter': {
        'z_min': 0.3,
        'z_max': 2.5,
        'lane_half_width': 1.8,
        'min_cluster_points': 4,
        'cluster_radius': 0.7,
    },
    'ngsim': {
        'min_duration_s': 50.0,
        'excluded_lanes': [1],
        'ramp_lane_min': 6,
        'headway_mismatch_m': 1.0,
    },
    'gap_synthesis': {
        'count': 112,
        'min_length_s': 5.0,
        'max_length_s': 15.0,
        'max_attempts': 1000,
    },
}


def _deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in (update or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


class RunConfig:
    """Configuration loader and accessor for reconstruction runs"""

    def __init__(self, config_file: Optional[str] = None):
        """
        Initialize configuration loader

        Args:
            config_file: Path to the configuration YAML file; falls back to
                $TRAJGAP_CONFIG, then to built-in defaults
        """
        self.config_file = config_file or os.environ.get(CONFIG_ENV_VAR) or None
        self.config_path = None
        self.config = _deep_merge(DEFAULTS, self._load_config())

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from YAML file"""
        if not self.config_file:
            return {}
        possible_paths = [
            self.config_file,
            os.path.join(os.path.dirname(__file__), '..', self.config_file),
        ]

        config_path = None
        for path in possible_paths:
            if os.path.exists(path):
                config_path = path
                break

        if not config_path:
            raise FileNotFoundError(f"Configuration file not found. Searched: {possible_paths}")

        try:
            with open(config_path, 'r') as file:
                config = yaml.safe_load(file) or {}
        except yaml.YAMLError as e:
            raise ValueError(f"Invalid YAML in configuration file {config_path}: {e}")
        if not isinstance(config, dict):
            raise ValueError(f"Configuration file {config_path} must contain a mapping")
        self.config_path = config_path
        logger.info("Configuration loaded from: %s", config_path)
        return config

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation

        Args:
            key_path: Dot-separated path to the configuration value (e.g., 'ga.population')
            default: Default value if key is not found
        """
        value = self.config
        try:
            for key in key_path.split('.'):
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key_path: str, value: Any):
        keys = key_path.split('.')
        node = self.config
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = value

    def apply_overrides(self, overrides: Dict[str, Any]):
        """Apply dot-path overrides, typically CLI flags; None values are ignored"""
        for key_path, value in overrides.items():
            if value is not None:
                self.set(key_path, value)

    def get_seed(self) -> int:
        return int(self.get('seed', 0))

    def get_jobs(self) -> int:
        return max(1, int(self.get('jobs', 1)))

    def get_dataset(self) -> str:
        return str(self.get('dataset', 'ngsim'))

    def get_models(self) -> List[str]:
        """Model selections to score; 'all' expands to each model separately"""
        selection = self.get('model', ALL_MODELS)
        if selection == ALL_MODELS:
            return list(MODEL_TAGS)
        if selection != BEST_OF_ALL:
            ModelFactory.model_class(selection)
        return [selection]

    def get_ga_config(self) -> GaConfig:
        ga = self.get('ga', {})
        return GaConfig(population=int(ga['population']), generations=int(ga['generations']),
                        crossover_rate=float(ga['crossover_rate']), mutation_rate=float(ga['mutation_rate']),
                        seed=self.get_seed(), elitism=int(ga['elitism']),
                        mutation_scale=float(ga.get('mutation_scale', 0.1)))

    def get_bounds(self, model: Optional[str] = None) -> Dict[str, Any]:
        """
        Parameter bounds as {name: (low, high)}; every model when ``model`` is None

        Raises:
            InvalidInputError: A bound is not a (low, high) pair
        """
        tags = [model] if model else list(MODEL_TAGS)
        out = {}
        for tag in tags:
            configured = self.get(f'bounds.{tag}', {}) or {}
            bounds = {}
            for name in ModelFactory.parameter_names(tag):
                pair = configured.get(name, DEFAULT_BOUNDS[tag][name])
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    raise InvalidInputError(f"bounds.{tag}.{name} must be [low, high]")
                bounds[name] = (float(pair[0]), float(pair[1]))
            ModelFactory.bounds_matrix(tag, bounds)
            out[tag] = bounds
        return out[model] if model else out

    def get_reconstruction_config(self, model: Optional[str] = None) -> ReconstructionConfig:
        rc = self.get('reconstruction', {})
        selection = model or self.get('model', ALL_MODELS)
        if selection == ALL_MODELS:
            selection = 'gipps'
        return ReconstructionConfig(short_gap_limit=float(rc['short_gap_limit']),
                                    context_length=float(rc['context_length']),
                                    slope_threshold=float(rc['slope_threshold']),
                                    blend_schedule=str(rc['blend_schedule']),
                                    model=selection,
                                    leader_speed=str(rc.get('leader_speed', 'follower')))

    def get_filter_config(self) -> FilterConfig:
        return FilterConfig(**{k: v for k, v in self.get('scan_filter', {}).items()})

    def get_extraction_rules(self) -> ExtractionRules:
        rules = self.get('ngsim', {})
        return ExtractionRules(min_duration_s=float(rules['min_duration_s']),
                               excluded_lanes=tuple(rules.get('excluded_lanes', (1,))),
                               ramp_lane_min=int(rules['ramp_lane_min']),
                               headway_mismatch_m=float(rules['headway_mismatch_m']))

    def get_gap_synthesis(self) -> Dict[str, Any]:
        return dict(self.get('gap_synthesis', {}))

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)

    def write_effective(self, path: str):
        """Write the merged configuration; loading it back reproduces the run"""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w') as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=True, default_flow_style=False)

    def print_config_summary(self):
        """Print a summary of key configuration values"""
        ga = self.get_ga_config()
        rc = self.get('reconstruction', {})
        print("📋 Configuration Summary:")
        print(f"  Source: {self.config_path or 'built-in defaults'}")
        print(f"  Seed: {self.get_seed()}")
        print(f"  Models: {', '.join(self.get_models())}")
        print(f"  GA: population {ga.population}, generations {ga.generations}, "
              f"crossover {ga.crossover_rate}, mutation {ga.mutation_rate}")
        print(f"  Short Gap Limit: {rc.get('short_gap_limit')}s")
        print(f"  Slope Threshold: {rc.get('slope_threshold')} m/s")
        print(f"  Jobs: {self.get_jobs()}")


def load_run_config(config_file: Optional[str] = None) -> RunConfig:
    """
    Convenience function to load run configuration

    Args:
        config_file: Path to configuration file

    Returns:
        RunConfig instance
    """
    return RunConfig(config_file)


if __name__ == '__main__':
    try:
        load_run_config(sys.argv[1] if len(sys.argv) > 1 else None).print_config_summary()
    except Exception as e:
        print(f"❌ Configuration test failed: {e}")
        sys.exit(1)
