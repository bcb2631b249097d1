"""
Logging for the Malicious Ad URL Detector.

Progress goes to stdout under the project logger tree. Command failures are
also reported as one JSON line on stderr so callers can parse them.
"""

import json
import logging
import sys
from typing import Any, Dict, Optional, TextIO

from core.config import settings
from core.errors import DetectorError

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s:%(funcName)s:%(lineno)d | %(message)s"

# Provider clients log every request at INFO.
NOISY_LOGGERS = ("urllib3", "requests", "httpx", "whois", "ipwhois", "tavily")


def setup_logging(
    level: Optional[str] = None,
    format_string: Optional[str] = None,
    stream: Optional[TextIO] = None,
) -> logging.Logger:
    """Route every logger to one stream handler; safe to call more than once."""
    name = (level or settings.LOG_LEVEL).upper()
    handler = logging.StreamHandler(stream or sys.stdout)
    handler.setFormatter(logging.Formatter(format_string or LOG_FORMAT))
    logging.basicConfig(level=getattr(logging, name, logging.INFO), handlers=[handler], force=True)
    for noisy in NOISY_LOGGERS:
        logging.getLogger(noisy).setLevel(logging.WARNING)
    return logging.getLogger(settings.PROJECT_NAME)


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(f"{settings.PROJECT_NAME}.{name}")


def log_error(logger: logging.Logger, msg: str, exc: Optional[BaseException] = None, **kwargs: Any) -> None:
    """Detector errors log their code without a traceback; anything else logs the traceback."""
    if isinstance(exc, DetectorError):
        logger.error("%s: [%s] %s", msg, exc.code, exc.message, extra=kwargs)
    elif exc is not None:
        logger.exception(msg, exc_info=exc, extra=kwargs)
    else:
        logger.error(msg, extra=kwargs)


def error_payload(code: str, message: str) -> Dict[str, str]:
    return {"error": code, "message": message}


def emit_error_line(code: str, message: str, stream: Optional[TextIO] = None) -> None:
    """One machine-readable JSON line: {"error": <code>, "message": <text>}."""
    out = stream or sys.stderr
    out.write(json.dumps(error_payload(code, message), sort_keys=True) + "\n")
    out.flush()
