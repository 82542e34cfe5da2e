"""End-to-end runs of the experiment runner."""
