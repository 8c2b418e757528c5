"""magsep simulates continuous-flow magnetophoretic capture of red blood cells on magnetized wire arrays."""

from __future__ import annotations

__version__ = "1.0.0"
