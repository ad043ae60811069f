"""Unit tests for Saxo Portfolio integration."""
