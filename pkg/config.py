#!/usr/bin/env python3
"""
Configuration Management Module

Handles loading, saving, and managing tool configuration.
"""

import copy
import os
import json
import sys
from path_utils import validate_and_prepare_path, resolve_relative_path

DEFAULT_CONFIG_FILE = "kan_hwcost_config.json"
THREADS_ENV = "KAN_HWCOST_THREADS"

# Default configuration
DEFAULT_CONFIG = {
    "analysis": {
        "mode": "lut",  # Basis evaluation: "lut" (tabulated) or "recursive" (Cox-de Boor / compute)
        "format": "table"  # Report format: "table", "json" or "csv"
    },
    "lut": {
        "resolution": 1024,  # Samples per knot interval / per unit input (>= 16)
        "interpolation": "linear",  # "linear" or "nearest" sample
        "chebyshev_span": 8.0  # Chebyshev tables cover [-span, span]
    },
    "validate": {
        "trials": 100,  # Random inputs per reconciliation run
        "seed": 42,  # Seed for weights and inputs
        "report_file": "reconcile_report.json"  # Written into output.out_dir
    },
    "sweep": {
        "template": "3,X,X,2",  # Architecture with one free width symbol
        "x_min": 4,  # Smallest swept width
        "x_max": 64,  # Largest swept width
        "families": ["bspline", "grbf", "chebyshev", "fourier"]  # KAN families compared with the MLP
    },
    "iso": {
        "baseline": "3,64,64,2",  # MLP baseline architecture
        "metrics": ["rm", "bop", "nabs"]  # Metrics solved for
    },
    "families": {
        # Representative parameters used by sweep and iso
        "bspline": {"type": "bspline", "k": 3, "G": 5},
        "grbf": {"type": "grbf", "N_c": 5},
        "chebyshev": {"type": "chebyshev", "n": 5},
        "fourier": {"type": "fourier", "G": 5}
    },
    "quant": {
        "bits": 8,  # Bitwidth of every operand in sweep and iso
        "scheme": "uniform"  # "uniform", "pot" or {"apot": n}
    },
    "output": {
        "out_dir": "results",  # Directory for CSV and JSON outputs
        "save_app_logs": False  # Whether to save application debug logs
    },
    "runtime": {
        "threads": 0  # Worker threads for iso (0 = one per CPU); KAN_HWCOST_THREADS overrides
    },
    "logging": {
        "debug": False  # Debug logging enabled/disabled
    }
}


def _merged(user_config):
    # Merge with defaults (user config overrides defaults, section by section)
    config = copy.deepcopy(DEFAULT_CONFIG)
    for section in user_config:
        if section in config and isinstance(config[section], dict) and isinstance(user_config[section], dict):
            config[section].update(user_config[section])
        else:
            config[section] = user_config[section]
    return config


def load_config(config_path=DEFAULT_CONFIG_FILE):
    """
    Load configuration from JSON file or create default.

    Args:
        config_path: Path to configuration file

    Returns:
        Dictionary containing merged configuration
    """
    # Resolve config path relative to script directory
    resolved_config_path = resolve_relative_path(config_path)

    if os.path.exists(resolved_config_path):
        try:
            with open(resolved_config_path, 'r') as f:
                user_config = json.load(f)
            return _merged(user_config)
        except Exception as e:
            print(f"Error loading config: {e}. Using defaults.", file=sys.stderr)
            return copy.deepcopy(DEFAULT_CONFIG)
    else:
        # Only create default config file if using the default path
        if config_path == DEFAULT_CONFIG_FILE:
            if save_config(DEFAULT_CONFIG, resolved_config_path):
                print(f"Created default config: {resolved_config_path}", file=sys.stderr)
            return copy.deepcopy(DEFAULT_CONFIG)
        else:
            # If a custom config path is provided and it doesn't exist, fail
            raise FileNotFoundError(f"Configuration file not found: {resolved_config_path}")


def save_config(config, config_path=DEFAULT_CONFIG_FILE, logger=None):
    """
    Save current configuration to file.

    Args:
        config: Configuration dictionary to save
        config_path: Path to configuration file
        logger: Optional logger instance for logging messages

    Returns:
        True when the file was written
    """
    # Validate path before attempting to write
    path_valid, validation_message = validate_and_prepare_path(config_path, logger)

    if not path_valid:
        error_msg = f"Cannot save configuration: {validation_message}"
        if logger:
            logger.error(error_msg)
        else:
            print(error_msg, file=sys.stderr)
        return False

    try:
        with open(config_path, 'w') as f:
            json.dump(config, f, indent=4)
        success_msg = "Configuration saved successfully"
        if logger:
            logger.info(success_msg)
        else:
            print(success_msg, file=sys.stderr)
        return True
    except Exception as e:
        error_msg = f"Error saving config: {e}"
        if logger:
            logger.error(error_msg)
        else:
            print(error_msg, file=sys.stderr)
        return False


def resolve_threads(config):
    """
    Number of worker threads: KAN_HWCOST_THREADS if set, else runtime.threads, 0 meaning one per CPU.
    """
    threads = config.get("runtime", {}).get("threads", 0)
    override = os.environ.get(THREADS_ENV)
    if override:
        try:
            threads = int(override)
        except ValueError:
            print(f"Ignoring {THREADS_ENV}={override!r}: not an integer", file=sys.stderr)
    if threads < 1:
        threads = os.cpu_count() or 1
    return threads
