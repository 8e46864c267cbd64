#!/usr/bin/env python3
"""
Setup script for crext
"""

import os

from setuptools import find_packages, setup

# Read README for long description
readme_path = os.path.join(os.path.dirname(__file__), "README.md")
try:
    with open(readme_path, encoding="utf-8") as f:
        long_description = f.read()
except FileNotFoundError:
    long_description = "crext - extension of CR functions along analytic discs"

# Read requirements
requirements_path = os.path.join(os.path.dirname(__file__), "requirements.txt")
try:
    with open(requirements_path, encoding="utf-8") as f:
        requirements = [
            line.split("#")[0].strip()
            for line in f
            if line.strip() and not line.startswith("#") and not line.startswith("-")
        ]
        # the dev tools are listed under extras_require
        requirements = requirements[: requirements.index("pytest>=7.4.0")]
except (FileNotFoundError, ValueError):
    requirements = [
        "click>=8.1.0",
        "typing_extensions>=4.5.0",
        "numpy>=1.24.0",
        "scipy>=1.11.0",
        "sympy>=1.12",
    ]

setup(
    name="crext",
    version="0.3.0",
    description="Bracket filtrations, sector conditions and analytic discs for CR extension",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="MIT",
    package_dir={"": "crext"},
    packages=find_packages(where="crext"),
    package_data={"crext": ["manifolds/*.mfd"]},
    include_package_data=True,
    python_requires=">=3.9",
    install_requires=requirements,
    extras_require={
        "dev": [
            "pytest>=7.4.0",
            "pytest-cov>=4.1.0",
            "black>=23.0.0",
            "isort>=5.12.0",
            "mypy>=1.5.0",
            "flake8>=6.0.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "crext=crext.cli:cli",
        ],
    },
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
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    keywords="CR manifolds analytic discs Bishop equation Lie brackets",
    zip_safe=False,
)
