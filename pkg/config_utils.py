#!/usr/bin/env python3
"""
Configuration for the Canny shader emulator
Values come from CANNY_* environment variables, falling back to DEFAULTS;
command-line flags override both.
"""

import logging
import os
from typing import Dict, Optional

logger = logging.getLogger(__name__)

ENV_PREFIX = 'CANNY_'

DEFAULTS: Dict[str, str] = {
    'kernel': '3',
    'low': '0.1',
    'high': '0.25',
    'magnitude': 'exact',
    'precision': 'mediump',
    'frames': '10',
    'mode': 'serialized',
    'report': 'csv',
    'workers': '1',
    'db': '',
    'device': 'desktop',
    'log_level': 'INFO',
}


def get_config(key: str, environ: Optional[Dict[str, str]] = None) -> str:
    environ = os.environ if environ is None else environ
    if key not in DEFAULTS:
        raise KeyError(f"Unknown config key: {key}")
    value = environ.get(ENV_PREFIX + key.upper())
    if value is None or value == '':
        return DEFAULTS[key]
    return value


def load_config(environ: Optional[Dict[str, str]] = None) -> Dict[str, str]:
    config = {key: get_config(key, environ) for key in DEFAULTS}
    overridden = [k for k in DEFAULTS if config[k] != DEFAULTS[k]]
    if overridden:
        logger.debug(f"Config from environment: {overridden}")
    return config
