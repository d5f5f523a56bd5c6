#!/usr/bin/env python3

import sqlite3
import os
from typing import Optional, Dict, Any, List, Tuple
from datetime import datetime, timezone
import logging

logger = logging.getLogger(__name__)

REQUIRED_TABLES = ['bench_runs', 'pass_times']


class DatabaseManager:
    def __init__(self, db_path: str = "canny_bench.db"):
        self.db_path = db_path
        self.conn: Optional[sqlite3.Connection] = None

    def connect(self) -> sqlite3.Connection:
        if self.conn is None:
            self.conn = sqlite3.connect(self.db_path)
            self.conn.execute("PRAGMA journal_mode=WAL")
            self.conn.execute("PRAGMA synchronous=NORMAL")
            self.conn.execute("PRAGMA foreign_keys=ON")
            logger.info(f"Connected: {self.db_path}")
        return self.conn

    def close(self):
        if self.conn:
            self.conn.close()
            self.conn = None

    def execute(self, sql: str, params: tuple = ()) -> sqlite3.Cursor:
        conn = self.connect()
        return conn.execute(sql, params)

    def executemany(self, sql: str, params: List[tuple]) -> sqlite3.Cursor:
        conn = self.connect()
        return conn.executemany(sql, params)

    def commit(self):
        if self.conn:
            self.conn.commit()

    def rollback(self):
        if self.conn:
            self.conn.rollback()

    def get_tables(self) -> List[str]:
        cursor = self.execute("SELECT name FROM sqlite_master WHERE type='table'")
        return [row[0] for row in cursor.fetchall()]

    def insert_bench_run(self, run: Dict[str, Any], rows: List[Dict[str, Any]]) -> int:
        """Store one bench run and its per-pass rows; returns the run id"""
        try:
            cursor = self.execute(
                """INSERT INTO bench_runs
                   (ts_utc, device, input, width, height, layout, kernel_size, precision,
                    mode, frames, fps_mean, fps_std, upper_bound_ms)
                   VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)""",
                (run.get('ts_utc') or datetime.now(timezone.utc).isoformat(),
                 run['device'], run['input'], run['width'], run['height'], run['layout'],
                 run['kernel_size'], run['precision'], run['mode'], run['frames'],
                 run.get('fps_mean'), run.get('fps_std'), run.get('upper_bound_ms'))
            )
            run_id = cursor.lastrowid
            self.executemany(
                """INSERT INTO pass_times (run_id, position, pass, mean_ms, std_ms, reads_per_pixel)
                   VALUES (?, ?, ?, ?, ?, ?)""",
                [(run_id, i, row['pass'], row['mean_ms'], row['std_ms'], row['reads_per_pixel'])
                 for i, row in enumerate(rows)]
            )
            self.commit()
        except sqlite3.Error:
            self.rollback()
            raise
        logger.info(f"Stored bench run {run_id} ({run['device']}, {len(rows)} rows)")
        return run_id

    def get_runs(self, limit: int = 20, device: Optional[str] = None) -> List[sqlite3.Row]:
        sql = """SELECT id, ts_utc, device, input, width, height, layout, kernel_size, precision,
                        mode, frames, fps_mean, fps_std, upper_bound_ms
                 FROM bench_runs"""
        params: tuple = ()
        if device:
            sql += " WHERE device = ?"
            params = (device,)
        sql += " ORDER BY id DESC LIMIT ?"
        self.connect().row_factory = sqlite3.Row
        return self.execute(sql, params + (limit,)).fetchall()

    def get_pass_times(self, run_id: int) -> List[sqlite3.Row]:
        self.connect().row_factory = sqlite3.Row
        cursor = self.execute(
            "SELECT pass, mean_ms, std_ms, reads_per_pixel FROM pass_times WHERE run_id = ? ORDER BY position",
            (run_id,)
        )
        return cursor.fetchall()

    def get_run_count(self) -> int:
        cursor = self.execute("SELECT COUNT(*) FROM bench_runs")
        result = cursor.fetchone()
        return result[0] if result else 0

    def __enter__(self):
        self.connect()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


def init_database(db_path: str = "canny_bench.db"):
    if not os.path.exists(db_path):
        logger.info(f"Creating db: {db_path}")

    with DatabaseManager(db_path) as db:
        schema_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "schema.sql")
        with open(schema_path, 'r') as f:
            schema_sql = f.read()

        statements = [stmt.strip() for stmt in schema_sql.split(';') if stmt.strip()]
        for statement in statements:
            db.execute(statement)

        db.commit()
        logger.info("DB initialized")
        logger.info(f"Tables: {db.get_tables()}")


def check_database(db_path: str) -> Tuple[bool, str]:
    """Check that the database exists and has the benchmark tables"""
    if not os.path.exists(db_path):
        return False, "Database not found"

    try:
        with DatabaseManager(db_path) as db:
            tables = db.get_tables()
    except sqlite3.Error as e:
        return False, f"Database error: {e}"

    missing_tables = [table for table in REQUIRED_TABLES if table not in tables]
    if missing_tables:
        return False, f"Missing tables: {missing_tables}"
    return True, "Database ready"
