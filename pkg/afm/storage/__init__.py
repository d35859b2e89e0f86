"""CSV and JSON artifact persistence."""
import logging
from pathlib import Path

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def ensure_dir(path) -> Path:
    """Create an output directory (and parents) if needed."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        logger.error(f"Cannot create output directory {path}: {e}")
        raise
    return path
