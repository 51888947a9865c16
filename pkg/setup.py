#!/usr/bin/env python3
"""Setup script for Channel Reliability Engine."""

from setuptools import setup

# The actual configuration is in pyproject.toml
# This file exists for compatibility with older tools
setup()
