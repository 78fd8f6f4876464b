from setuptools import find_packages, setup

# Important: Update this when making new releases!
# Be sure to update `__version__` in '__init__.py' as well
version = "1.0.1"

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="confdimlab",
    version=version,
    description="confdimlab is a numerical laboratory for discrete modulus, energy forms and conformal dimension estimates on self-similar fractals.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="MIT",
    packages=find_packages(exclude=["tests", "tests.*"]),
    keywords=["Fractal", "Conformal Dimension", "Modulus", "Sierpinski", "Dirichlet Form"],
    python_requires=">=3.8",
    install_requires=[
        "matplotlib",
        "networkx",
        "numpy",
        "pytest",
        "scipy",
        "typing_extensions",
    ],
    entry_points={
        "console_scripts": ["confdimlab = confdimlab.cli:main"],
        # This makes the graph fixtures available to pytest
        "pytest11": ["confdimlab.fixtures = confdimlab.fixtures"],
    },
    classifiers=[
        "Framework :: Pytest",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
)
