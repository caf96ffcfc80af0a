# !/usr/bin/env python

from setuptools import setup, find_packages

with open("README.md") as f:
    long_description = f.read()

setup(
    name="dyadmhd",
    packages=find_packages(".", exclude=["tests", "tests.*", "examples", "examples.*"]),
    version="0.1.0",
    description="Stochastic dyadic MHD shell models: simulation and verification",
    install_requires=[
        "numpy",
        "scipy",
        "climax",
        "tqdm",
        "coloredlogs",
        "pydantic>=2",
        "pyyaml",
    ],
    entry_points={"console_scripts": ["dyadmhd=dyadmhd.cli:main"]},
    long_description=long_description,
    long_description_content_type="text/markdown",
)
