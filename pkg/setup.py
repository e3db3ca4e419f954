from setuptools import setup, find_packages

with open("README.md") as f:
    long_description = f.read()

setup(
    name="bicount",
    version="0.1.0",
    description="Boundary-intersection counts of billiard eigenfunctions and their trace formula",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(),
    setup_requires=["pytest-runner"],
    python_requires=">=3.8",
    install_requires=["numpy>=1.20", "numba", "scipy>=1.6", "pandas>=1.2", "pydantic>=2"],
    tests_require=["pytest"],
    entry_points={"console_scripts": ["bicount = bicount.cli:main"]},
    license="Apache License 2.0",
    keywords=["billiard", "eigenfunction", "nodal", "trace formula", "periodic orbits"],
    classifiers=[
        "Development Status :: 4 - Beta",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: MacOS :: MacOS X",
        "Operating System :: POSIX :: Linux",
        "Operating System :: Microsoft :: Windows",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3 :: Only",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    include_package_data=True,
    zip_safe=False,
)
