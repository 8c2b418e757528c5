#!/usr/bin/env python3
"""
Check and maintain the bundled scenario files.

- Every magsep/scenarios/*.json must load without validation errors.
- Files are kept sorted (recursively by keys, indent 4). With --fix, the
  files are written back sorted; otherwise, an unsorted file will be reported.

Exit codes:
  0: Everything OK
  1: Problems found (invalid scenario or not sorted)

Usage:
  python3 script/check_scenarios.py [--fix]
"""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
import sys
from typing import Any

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

from magsep.config import load_config  # noqa: E402
from magsep.exceptions import InvalidConfig  # noqa: E402
from magsep.support import dumps_sorted  # noqa: E402

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)
SCENARIO_DIR = ROOT / "magsep/scenarios"


def load_json(path: Path) -> Any:
    """Load and parse a JSON file from the given path."""
    with path.open("r", encoding="utf-8") as f:
        return json.load(f)


def check_sorted_on_disk(path: Path, expected: str) -> bool:
    """Return True if the file content equals the expected string."""
    with path.open("r", encoding="utf-8") as f:
        return f.read() == expected


def main() -> int:
    """Validate and optionally sort the scenario files."""
    parser = argparse.ArgumentParser(description="Check and maintain bundled scenario files")
    parser.add_argument("--fix", action="store_true", help="Write files back sorted")
    # Accept (and ignore) any filenames passed by pre-commit hooks
    parser.add_argument("paths", nargs="*", help="Optional file paths (ignored; script uses fixed locations)")
    args = parser.parse_args()

    problems: list[str] = []
    for path in sorted(SCENARIO_DIR.glob("*.json")):
        name = path.relative_to(ROOT)
        document = load_json(path)
        try:
            load_config(document)
        except InvalidConfig as err:
            problems.append(f"Invalid: {name}: {err}")
        expected = dumps_sorted(document)
        if not check_sorted_on_disk(path, expected):
            if args.fix:
                path.write_text(expected, encoding="utf-8")
                logger.info("Sorted: %s", name)
            else:
                problems.append(f"Not sorted: {name}")

    if problems:
        logger.error("%s", "\n".join(problems))
        return 1

    logger.info("Scenarios OK")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
