# tests/test_results_io.py

import pandas as pd

from ramdp.harness import ExperimentRecord, aggregate
from ramdp.results_io import write_aggregate_csv, write_records_csv

RECORDS = [
    ExperimentRecord(0, "LUI", 0, 0, 0.7, 1e-4, 1e-4 - 0.7, 0.4999, 0.0),
    ExperimentRecord(0, "LUI", 1, 1, 0.7, 0.3333333333333333, 0.3333333333333333 - 0.7, 0.25, 0.0),
    ExperimentRecord(1, "LUI", 0, 0, 0.0, 1e-4, 1e-4, 0.4999, 0.0),
]


def test_records_csv_header_and_line_endings(tmp_path):
    path = write_records_csv(RECORDS, tmp_path / "out" / "records.csv")
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    header = raw.decode().splitlines()[0]
    assert header == "rep,learner,iteration,trajectories,perf_true,perf_model,est_error,model_error,wall_ms"


def test_records_csv_uses_ten_significant_digits(tmp_path):
    path = write_records_csv(RECORDS, tmp_path / "records.csv")
    second = path.read_text().splitlines()[2]
    assert second.split(",")[5] == "0.3333333333"


def test_records_read_back(tmp_path):
    path = write_records_csv(RECORDS, tmp_path / "records.csv")
    loaded = pd.read_csv(path)
    assert list(loaded.itertuples(index=False, name=None))[0][:4] == (0, "LUI", 0, 0)
    assert loaded["learner"].tolist() == ["LUI", "LUI", "LUI"]
    assert loaded["perf_model"].iloc[0] == 1e-4


def test_aggregate_csv_columns(tmp_path):
    path = write_aggregate_csv(aggregate(RECORDS), tmp_path / "aggregate.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns[:3]) == ["learner", "trajectories", "reps"]
    assert "ci_hi_model_error" in frame.columns
    assert frame["trajectories"].tolist() == [0, 1]
