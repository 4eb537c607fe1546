"""CLI run configuration and subcommand orchestration."""
