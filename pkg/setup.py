# Copyright 2024 egosocial developers

from setuptools import setup
from egosocial import __version__

with open("README.md", "r", encoding="utf-8") as f:
    long_description = f.read()

setup(
    name='egosocial',
    version=__version__,
    packages=['egosocial'],
    license='BSD-3-Clause',
    author='egosocial developers',
    author_email='',
    description='Social interaction detection, categorization and social pattern profiles for egocentric photo-streams',
    classifiers=[
        "License :: OSI Approved :: BSD License",
        "Natural Language :: English",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Development Status :: 4 - Beta",
    ],
    install_requires=[
        "numpy~=1.26",
        "scipy~=1.11",
        "lxml~=4.9.2",
    ],
    extras_require={
        "test": ["pytest~=7.4"],
    },
    entry_points={
        "console_scripts": ["egosocial = egosocial.cli:main"],
    },
    python_requires=">=3.10",
    long_description=long_description,
    long_description_content_type="text/markdown",
)
