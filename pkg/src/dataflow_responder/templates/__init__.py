"""Jinja2 templates for prompt rendering."""
