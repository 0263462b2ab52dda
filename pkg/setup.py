from setuptools import setup, find_packages


__version__ = "0.1.0"


with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()


setup(
    name="ttrnn",
    version=__version__,
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    include_package_data=True,
    description="Tensor-Train recurrent networks for high-dimensional frame sequences",
    long_description=long_description,
    long_description_content_type="text/markdown",
    python_requires=">=3.9",
    install_requires=[
        "numpy",
        "pandas>=1.5",
        "tqdm",
        "opencv-python",
    ],
    extras_require={
        "test": ["pytest"],
    },
    entry_points={
        "console_scripts": ["ttrnn = ttrnn.cli:main"],
    },
)
