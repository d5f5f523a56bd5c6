#!/usr/bin/env python3
"""
Initialize the benchmark history database
Creates the SQLite schema with WAL mode enabled
"""

import os
import sys
import argparse
import logging
from pathlib import Path

# Add current directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config_utils import get_config
from db_utils import DatabaseManager, check_database, init_database

logging.basicConfig(
    level=get_config('log_level').upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

logger = logging.getLogger(__name__)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Create the benchmark history database")
    parser.add_argument('db', nargs='?', default=get_config('db') or 'canny_bench.db',
                        help='Database path (default: $CANNY_DB or canny_bench.db)')
    args = parser.parse_args(argv)

    db_path = Path(args.db).absolute()
    print(f"Database will be created at: {db_path}")

    try:
        init_database(str(db_path))
        db_ready, db_message = check_database(str(db_path))
        print(db_message)
        if not db_ready:
            return 1
        with DatabaseManager(str(db_path)) as db:
            journal_mode = db.execute("PRAGMA journal_mode").fetchone()[0]
        print(f"Journal mode: {journal_mode}")
        if journal_mode != "wal":
            print("WAL mode not enabled - this may affect concurrent readers")
    except Exception as e:
        logger.error(f"Failed to initialize database: {e}")
        print(f"Error: {e}")
        return 1

    print("\nNext step: python3 Main.py bench <image.pnm> --db", db_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
