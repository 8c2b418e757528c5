"""Tests for magsep."""
