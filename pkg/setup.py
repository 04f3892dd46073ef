from setuptools import setup
import re

version = ""
with open("mathoNet/__init__.py") as initpy:
    regex = re.search(
        r'^__version__\s*=\s*[\'"]([^\'"]*)[\'"]', initpy.read(), re.MULTILINE
    )
    assert regex != None
    version = regex.group(1)

if not version:
    raise RuntimeError("Version is not set.")

setup(
    name="mathonet-console",
    version=version,
    description="Discover governing equations from data with sparse Bayesian MathONets, from the console!",
    long_description=open("README.md", encoding="utf8").read(),
    long_description_content_type="text/markdown",
    license="MIT",
    classifiers=["Programming Language :: Python :: 3.8"],
    packages=["mathoNet"],
    python_requires=">=3.8",
    install_requires=["numpy", "sympy", "google-re2", "aioconsole"],
    include_package_data=True,
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["mathonet=mathoNet.commands:main"]},
)
