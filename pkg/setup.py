# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

"""
Package installation setup
"""

import os
import re
import subprocess
from pathlib import Path

from setuptools import find_packages, setup

version = "0.1.0a0"
sha = 'Unknown'
src_folder = 'srbayes'
package_index = 'python-srbayes'

cwd = Path(__file__).parent.absolute()

if os.getenv('BUILD_VERSION'):
    version = os.getenv('BUILD_VERSION')
elif sha != 'Unknown':
    try:
        sha = subprocess.check_output(['git', 'rev-parse', 'HEAD'], cwd=cwd).decode('ascii').strip()
    except Exception:
        pass
    version += '+' + sha[:7]
print(f"Building wheel {package_index}-{version}")

with open(cwd.joinpath(src_folder, 'version.py'), 'w') as f:
    f.write(f"__version__ = '{version}'\n")

with open('README.md', 'r') as f:
    readme = f.read()

# Borrowed from https://github.com/huggingface/transformers/blob/master/setup.py
_deps = [
    "numpy>=1.22.0",
    "scipy>=1.7.0",
    "matplotlib>=3.3.0",
    "tqdm>=4.30.0",
    "pydantic>=2.0.0",
    # Testing
    "pytest>=5.3.2",
    "coverage>=4.5.4",
    "requirements-parser==0.2.0",
    # Quality
    "flake8>=3.9.0",
    "isort>=5.7.0",
    "mypy>=0.812",
    "pydocstyle>=6.1.1",
    # Docs
    "sphinx>=4.0.0",
    "sphinx-rtd-theme>=1.0.0",
    "sphinx-copybutton>=0.3.1",
    "recommonmark>=0.7.1",
]

deps = {b: a for a, b in (re.findall(r"^(([^!=<>]+)(?:[!=<>].*)?$)", x)[0] for x in _deps)}


def deps_list(*pkgs):
    return [deps[pkg] for pkg in pkgs]


install_requires = [
    deps["numpy"],
    deps["scipy"],
    deps["matplotlib"],
    deps["tqdm"],
    deps["pydantic"],
]

extras = {}

extras["testing"] = deps_list(
    "pytest",
    "coverage",
    "requirements-parser",
)

extras["quality"] = deps_list(
    "flake8",
    "isort",
    "mypy",
    "pydocstyle",
)

extras["docs"] = deps_list(
    "sphinx",
    "sphinx-rtd-theme",
    "sphinx-copybutton",
    "recommonmark",
)

extras["dev"] = (
    extras["testing"]
    + extras["quality"]
    + extras["docs"]
)

setup(
    # Metadata
    name=package_index,
    version=version,
    author='srbayes contributors',
    description='Bayesian estimation and projection of subnational sex ratios at birth.',
    long_description=readme,
    long_description_content_type="text/markdown",
    license='Apache',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: Apache Software License',
        'Natural Language :: English',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    keywords=['demography', 'sex ratio at birth', 'bayesian', 'mcmc', 'projection'],

    # Package info
    packages=find_packages(exclude=('tests',)),
    zip_safe=True,
    python_requires='>=3.8.0',
    include_package_data=True,
    install_requires=install_requires,
    extras_require=extras,
    entry_points={'console_scripts': ['srbayes=srbayes.cli:main']},
    package_data={'': ['LICENSE']}
)
