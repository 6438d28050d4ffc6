"""Simulation of CSI obfuscation against localization and its blind recovery."""

__version__ = "0.1.0"
