"""hjminimax test suite."""
