"""Contact Hamiltonians and their characteristic flow."""
