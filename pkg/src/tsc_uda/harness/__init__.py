"""Configuration, metrics files, plots and the command-line entry point."""
