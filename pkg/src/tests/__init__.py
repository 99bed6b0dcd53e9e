"""Test suite for ecstream."""
