"""Violin and summary charts for inventory A/B-test result exports."""

from .render import PanelSpec, SchemaError, render_summary, render_violin

__version__ = "0.1.0"
