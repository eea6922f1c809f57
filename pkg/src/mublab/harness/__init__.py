"""Command-line orchestration, configuration and result files."""
