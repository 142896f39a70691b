"""Command-line entrypoint (`python -m cli` / `polyvit`)."""
