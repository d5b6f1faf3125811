"""Packaged data files: sample manifest and configuration profiles."""
