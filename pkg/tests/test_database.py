# tests/test_database.py

import sqlite3

import pytest

from ramdp import database
from ramdp.harness import ExperimentRecord


@pytest.fixture
def db_path(tmp_path):
    path = str(tmp_path / "store" / "ramdp.db")
    yield path
    database.close_all()


def _records():
    return [
        ExperimentRecord(rep, "LUI", iteration, 2 ** iteration, 0.5, 0.25, -0.25, 0.1, 1.5)
        for rep in range(2)
        for iteration in range(3)
    ]


def test_run_and_records_round_trip(db_path):
    document = {"experiment": {"environment": "chain"}, "learners": [{"method": "LUI"}]}
    run_id = database.insert_run(db_path, document, seed=4)
    database.insert_records(db_path, run_id, _records())

    assert database.fetch_run_config(db_path, run_id) == document
    assert database.fetch_records(db_path, run_id) == _records()


def test_runs_are_kept_apart(db_path):
    first = database.insert_run(db_path, {}, seed=0)
    second = database.insert_run(db_path, {}, seed=1)
    database.insert_records(db_path, first, _records()[:2])
    assert second != first
    assert database.fetch_records(db_path, second) == []
    assert database.fetch_run_config(db_path, 999) is None


def test_connection_is_cached(db_path):
    assert database.get_conn(db_path) is database.get_conn(db_path)


def test_old_store_gains_the_timing_column(db_path, tmp_path):
    (tmp_path / "store").mkdir()
    conn = sqlite3.connect(db_path)
    conn.execute("CREATE TABLE runs (id INTEGER PRIMARY KEY AUTOINCREMENT, config_json TEXT, seed INTEGER, "
                 "created_at DATETIME DEFAULT CURRENT_TIMESTAMP)")
    conn.execute("CREATE TABLE records (run_id INTEGER, rep INTEGER, learner TEXT, iteration INTEGER, "
                 "trajectories INTEGER, perf_true REAL, perf_model REAL, est_error REAL, model_error REAL)")
    conn.execute("INSERT INTO runs (config_json, seed) VALUES ('{}', 0)")
    conn.execute("INSERT INTO records VALUES (1, 0, 'MAP', 0, 0, 0.5, 0.5, 0.0, 0.2)")
    conn.commit()
    conn.close()

    (record,) = database.fetch_records(db_path, 1)
    assert record.learner == "MAP"
    assert record.wall_ms == 0
