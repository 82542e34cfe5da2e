"""Core infrastructure: settings, logging, errors, retries and value objects."""
