#!/usr/bin/env python
import setuptools

setuptools.setup(
    name="tenbasis",
    version="0.1.0",
    python_requires=">=3.8",
    packages=setuptools.find_packages(exclude=["test", "test.*", "examples", "examples.*"]),
    install_requires=[
        "numpy",
        "scipy>=1.7",
        "pandas>=1.3.4",
        "dask",
        "scikit-learn",
        "nibabel",
    ],
    extras_require={
        "test": ["pytest"],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: GNU General Public License v3 or later (GPLv3+)",
        "Operating System :: OS Independent",
    ],
    license="GPL-3.0+",
    description="Tensor function-on-scalar regression of 3-D volumes: CP basis, conjugate Bayesian model and "
                "simultaneous credible band inference.",
    platforms='any',
    entry_points={
        "console_scripts": [
            "tenbasis = tenbasis.cli.tenbasis_parser:main",
        ],
    },
)
