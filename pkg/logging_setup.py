#!/usr/bin/env python3
"""
Logging Setup Module

Handles configuration and initialization of tool logging.
"""

import logging
import os
import sys
from path_utils import validate_directory_path, resolve_relative_path

LOG_FILE = 'kan_hwcost.log'


def setup_logging(config):
    """
    Setup logging configuration based on tool settings.

    Diagnostics go to stderr (and optionally a log file) so stdout stays free for results.

    Args:
        config: Tool configuration dictionary

    Returns:
        Configured logger instance
    """
    handlers = []

    # Always add console handler (stderr)
    handlers.append(logging.StreamHandler())

    log_file = None
    # Only add file handler if app logging is enabled
    if config["output"]["save_app_logs"]:
        log_dir = resolve_relative_path(config["output"]["out_dir"])
        dir_ok, message = validate_directory_path(log_dir)
        if dir_ok:
            log_file = os.path.join(log_dir, LOG_FILE)
            handlers.append(logging.FileHandler(log_file))
        else:
            print(f"Warning: {message}", file=sys.stderr)

    debug_enabled = config.get("logging", {}).get("debug", False)
    level = logging.DEBUG if debug_enabled else logging.INFO
    logging.basicConfig(
        format='%(asctime)s - %(levelname)s - %(message)s',
        level=level,
        handlers=handlers,
        force=True
    )

    logger = logging.getLogger("kan_hwcost")

    if log_file:
        logger.debug(f"Application logging enabled. Log file: {log_file}")
    else:
        logger.debug("Application logging to console only (file logging disabled)")

    return logger
