# ramdp/database.py

import json
import logging
import os
import sqlite3

from .harness import ExperimentRecord

logger = logging.getLogger('Ramdp')

# One cached connection per database file
CONNECTIONS = {}


def get_conn(db_path):
    conn = CONNECTIONS.get(db_path)
    if conn is None:
        try:
            db_dir = os.path.dirname(db_path)
            if db_dir:
                os.makedirs(db_dir, exist_ok=True)
            conn = sqlite3.connect(db_path)
            cursor = conn.cursor()

            logger.debug(f"Creating tables in {db_path} if not exists...")
            cursor.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                config_json TEXT,
                seed INTEGER,
                created_at DATETIME DEFAULT CURRENT_TIMESTAMP
            )
            """)
            cursor.execute("""
            CREATE TABLE IF NOT EXISTS records (
                run_id INTEGER REFERENCES runs(id),
                rep INTEGER,
                learner TEXT,
                iteration INTEGER,
                trajectories INTEGER,
                perf_true REAL,
                perf_model REAL,
                est_error REAL,
                model_error REAL
            )
            """)

            # Stores created before timing was recorded lack the wall_ms column
            cursor.execute("PRAGMA table_info(records)")
            columns = {row[1] for row in cursor.fetchall()}
            if 'wall_ms' not in columns:
                logger.info("Adding wall_ms column to records table...")
                cursor.execute("ALTER TABLE records ADD COLUMN wall_ms REAL DEFAULT 0")

            conn.commit()
            CONNECTIONS[db_path] = conn
            logger.debug(f"Database connection established for {db_path}")
        except sqlite3.Error as e:
            logger.error(f"Database error connecting to {db_path}: {e}")
            raise

    return conn


def close_all():
    for conn in CONNECTIONS.values():
        conn.close()
    CONNECTIONS.clear()


def insert_run(db_path, config_document, seed):
    try:
        conn = get_conn(db_path)
        cursor = conn.cursor()
        cursor.execute(
            "INSERT INTO runs (config_json, seed) VALUES (?, ?)",
            (json.dumps(config_document, sort_keys=True), seed),
        )
        conn.commit()
        logger.info(f"Registered run {cursor.lastrowid} in {db_path}")
        return cursor.lastrowid
    except sqlite3.Error as e:
        logger.error(f"Error registering run in {db_path}: {e}")
        raise


def insert_records(db_path, run_id, records):
    try:
        conn = get_conn(db_path)
        conn.executemany(
            """
            INSERT INTO records (run_id, rep, learner, iteration, trajectories,
                                 perf_true, perf_model, est_error, model_error, wall_ms)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            """,
            [
                (run_id, r.rep, r.learner, r.iteration, r.trajectories,
                 r.perf_true, r.perf_model, r.est_error, r.model_error, r.wall_ms)
                for r in records
            ],
        )
        conn.commit()
        logger.info(f"Stored {len(records)} records for run {run_id}")
    except sqlite3.Error as e:
        logger.error(f"Error storing records for run {run_id}: {e}")
        raise


def fetch_run_config(db_path, run_id):
    cursor = get_conn(db_path).cursor()
    cursor.execute("SELECT config_json FROM runs WHERE id = ?", (run_id,))
    row = cursor.fetchone()
    return json.loads(row[0]) if row else None


def fetch_records(db_path, run_id):
    cursor = get_conn(db_path).cursor()
    cursor.execute(
        """
        SELECT rep, learner, iteration, trajectories, perf_true, perf_model,
               est_error, model_error, wall_ms
        FROM records
        WHERE run_id = ?
        ORDER BY rowid
        """,
        (run_id,),
    )
    return [ExperimentRecord(*row) for row in cursor.fetchall()]
