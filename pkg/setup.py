from setuptools import setup, find_packages

setup(
    name="bayes_itl",
    version="1.0.0",
    packages=find_packages(include=["bayes_itl", "bayes_itl.*"]),
    package_data={"bayes_itl.config": ["config.json"]},
    python_requires=">=3.9",
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "matplotlib",
        "tqdm",
        "pydantic>=2",
        "pyyaml",
        "fastapi",
        "uvicorn",
        "python-dotenv",
    ],
    extras_require={
        "test": ["pytest", "httpx"],
    },
    entry_points={
        "console_scripts": ["bayes-itl=bayes_itl.utils.cli:main"],
    },
)
