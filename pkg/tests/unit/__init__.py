"""Unit tests for hjminimax."""
