#!/usr/bin/env python3

from setuptools import setup

with open("src/polaron_qhm/version.py", encoding="utf-8") as fp:
    version = fp.read().split('"')[1]

setup(
    name="polaron-qhm",
    version=version,
    description="Polaron-frame Floquet-Lindblad simulator for strongly coupled quantum heat machines",
    author="Lemonade SDK",
    author_email="lemonade@amd.com",
    packages=["polaron_qhm"],
    package_dir={"": "src"},
    install_requires=[
        "numpy>=1.23",
        "scipy>=1.9",
        "pandas>=1.5",
        "pyyaml>=6.0",
        "jinja2>=3.1.0",
    ],
    entry_points={
        "console_scripts": [
            "polaron-qhm=polaron_qhm.cli:main",
        ],
    },
    python_requires=">=3.8",
    package_data={
        "polaron_qhm": ["templates/**/*"],
    },
    long_description=open("README.md", "r", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
)

# Copyright (c) 2025 AMD
