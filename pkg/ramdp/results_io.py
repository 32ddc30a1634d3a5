# ramdp/results_io.py

import logging
from pathlib import Path

from .harness import records_frame

logger = logging.getLogger('Ramdp')

FLOAT_FORMAT = "%.10g"
RECORDS_FILE = "records.csv"
AGGREGATE_FILE = "aggregate.csv"


def _write_frame(frame, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        logger.error(f"❌ Failed to write {path}: {e}")
        raise
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_records_csv(records, path):
    return _write_frame(records_frame(records), path)


def write_aggregate_csv(frame, path):
    return _write_frame(frame, path)
