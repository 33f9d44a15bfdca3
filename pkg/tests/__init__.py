"""Test package for keygroup."""
