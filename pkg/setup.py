"""
Setup script for Oneshot Landmarks.
"""
from setuptools import setup, find_packages

setup(
    name="oneshot-landmarks",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    include_package_data=True,
    python_requires=">=3.10",
    install_requires=[
        "click>=8.0.0",
        "pydantic>=2.0.0",
        "python-dotenv>=1.0.0",
        "numpy>=1.26.0",
        "torch>=2.2.0",
        "pillow>=10.0.0",
        "safetensors>=0.4.0",
        "scipy>=1.11.0",
        "tqdm>=4.66.0",
        "tabulate>=0.9.0",
        "tomli>=1.1.0; python_version < '3.11'",
        "matplotlib>=3.8.0",
    ],
    extras_require={
        "dev": [
            "pytest",
            "pytest-mock",
        ],
    },
    entry_points={
        "console_scripts": [
            "landmark-cli=oneshot_landmarks.cli.main:cli",
        ],
    },
    description="One-shot anatomical landmark detection on frozen dense features with bidirectional matching",
)
