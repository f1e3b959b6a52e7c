#!/usr/bin/env python3
"""
Shared Utilities
Common helpers used across the simulator
"""

import hashlib
import logging

logger = logging.getLogger("ncjtsim.shared")


def generate_hash(data: str) -> str:
    """Generate SHA256 hash of data"""
    return hashlib.sha256(data.encode()).hexdigest()


def percent_change(value: float, reference: float):
    """Relative change in percent, None when undefined"""
    if value is None or reference is None or reference == 0:
        return None
    return 100.0 * (value - reference) / reference
