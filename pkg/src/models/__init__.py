"""Data models for terms, clauses, theories, messages and run settings."""
