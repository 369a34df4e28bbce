"""Command-line runner: configuration, integration, output and metrics."""
