"""Pytests init file."""
