"""
xlinker
"""
import codecs
import os
import re

from setuptools import setup

install_requires = [
    "click>=7.0",
    "joblib>=0.14",
    "networkx>=2.7",
    "numpy>=1.17",
    "rapidfuzz>=2.0",
    "scikit-learn>=0.22",
    "scipy>=1.8",
]

dev_requires = ["black==19.3b0", "flake8==3.7.7", "isort==4.3.19"]

doc_requires = ["recommonmark==0.5.0", "sphinx==2.1.2", "sphinx-rtd-theme==0.4.3"]

test_requires = [
    "coverage>=4.5.3",
    "pytest>=4.6.2",
    "pytest-cov>=2.7.1",
    "pytest-html>=1.20.0",
    "tox>=3.12.1",
]

project_root = os.path.dirname(os.path.abspath(__file__))

with codecs.open(
    os.path.join(project_root, "xlinker", "__init__.py"), "r", "latin1"
) as fp:
    try:
        version = re.findall(r"^__version__ = \"([^']+)\"\r?$", fp.read(), re.M)[0]
    except IndexError:
        raise RuntimeError("Unable to determine version.")

with open(os.path.join(project_root, "README.md"), "r") as f:
    long_description = f.read()

setup(
    name="xlinker",
    version=version,
    license="MIT",
    description="Biomedical entity linking with extreme multi-label ranking and PageRank disambiguation.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=["xlinker"],
    platforms="any",
    python_requires=">=3.8",
    install_requires=install_requires,
    extras_require={
        "dev": dev_requires + test_requires + doc_requires,
        "test": test_requires,
        "doc": doc_requires,
    },
    entry_points={"console_scripts": ["xlinker=xlinker.cli:main"]},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Topic :: Scientific/Engineering :: Bio-Informatics",
    ],
)
