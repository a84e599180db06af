#!/usr/bin/env python3
"""
Setup script for Action Proposals.
"""

from setuptools import setup, find_packages
from pathlib import Path

# Read README
readme_path = Path(__file__).parent / "README.md"
long_description = ""
if readme_path.exists():
    long_description = readme_path.read_text(encoding="utf-8")

setup(
    name="action-proposals",
    version="1.0.0",
    description="Unsupervised spatio-temporal action proposals from per-frame human detections",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="GPL-3.0",

    packages=find_packages(exclude=["tests", "tests.*"]),

    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "pandas>=2.0",
        "scikit-learn>=1.2",
        "tomli>=2.0; python_version < '3.11'",
    ],
    extras_require={
        "tests": ["pytest>=7.0"],
    },

    entry_points={
        "console_scripts": [
            "action-proposals=action_proposals.__main__:main",
        ],
    },

    classifiers=[
        "Development Status :: 4 - Beta",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Image Recognition",
    ],

    keywords="action proposals video detection tracking greedy submodular",
)
