"""Feature packages: one per stage of the estimation pipeline."""
