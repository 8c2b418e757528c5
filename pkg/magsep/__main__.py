"""Run the command-line harness with python -m magsep."""

from __future__ import annotations

from .cli import main

raise SystemExit(main())
