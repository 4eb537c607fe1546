"""Train/test splitting, penalty grids and path evaluation."""
