"""Bundled benchmark problems with their reference solutions."""
