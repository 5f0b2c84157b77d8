#!/usr/bin/env python3
"""
Setup script for the fiveprime toolkit.
"""

from setuptools import setup

setup(
    name="fiveprime",
    version="0.1.0",
    description="Numerical toolkit for the two-exponent inequality in five primes",
    py_modules=[
        "acceptance_checks",
        "acceptance_runner",
        "counting",
        "decomp",
        "errors",
        "exppair",
        "expsum",
        "fiveprime_cli",
        "params",
        "primes",
        "quadrature",
    ],
    packages=["storage"],
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.24.0",
        "mpmath>=1.3.0",
    ],
    entry_points={
        "console_scripts": [
            "fiveprime=fiveprime_cli:main",
        ],
    },
)
