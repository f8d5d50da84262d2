#!/usr/bin/env python3
"""
Setup script for the NESS current-bounds toolkit
"""

from setuptools import setup

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="ness-bounds",
    version="1.0.0",
    author="NESS Bounds Contributors",
    author_email="",
    description="Steady-state currents of pumped, lossy quadratic systems and their universal bounds",
    long_description=long_description,
    long_description_content_type="text/markdown",
    py_modules=[
        "ensembles",
        "experiments",
        "linalg_core",
        "mcp_server",
        "ness_boson",
        "ness_cli",
        "ness_config",
        "ness_errors",
        "ness_fermion",
        "perturbative",
        "ribbon",
        "utils",
    ],
    data_files=[("", ["ness_config.json"])],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.21.0",
        "scipy>=1.8.0",
        "mcp>=1.0.0,<2",
        "python-dotenv>=1.1.1",
    ],
    extras_require={
        "dev": [
            "pytest>=6.0",
            "pytest-asyncio>=0.18.0",
            "hypothesis>=6.0",
            "black>=22.0",
            "flake8>=4.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "ness=ness_cli:main",
            "ness-mcp=mcp_server:run",
        ],
    },
)
