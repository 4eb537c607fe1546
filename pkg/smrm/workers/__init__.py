"""Process-pool execution of independent warm-start chains."""
