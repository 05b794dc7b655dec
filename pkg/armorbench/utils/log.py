"""
Logging setup for ArmorBench.
Line-oriented key/value events through structlog; timestamps are opt-in so
two runs of the same config produce identical logs.
"""

import logging
import sys

import structlog


def configure_logging(level="INFO", timestamps=False, stream=None):
    """Configure structlog for the whole process."""
    numeric_level = getattr(logging, str(level).upper(), None)
    if not isinstance(numeric_level, int):
        numeric_level = logging.INFO

    processors = [structlog.processors.add_log_level]
    if timestamps:
        processors.append(structlog.processors.TimeStamper(fmt="iso", utc=True))
    processors.append(
        structlog.processors.KeyValueRenderer(
            key_order=["timestamp", "level", "event"] if timestamps else ["level", "event"],
            sort_keys=True,
            drop_missing=True,
        )
    )

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.make_filtering_bound_logger(numeric_level),
        logger_factory=structlog.PrintLoggerFactory(file=stream or sys.stderr),
        cache_logger_on_first_use=False,
    )
