from setuptools import setup, find_packages

kwargs = {
    "name": "lpmink",
    "version": "0.1.0",
    "packages": find_packages(include=["lpmink"]),
    "install_requires": [
        "numpy",
        "numba",
        "scipy",
        "sympy",
        "h5py",
        "mpi4py",
        "colorama",
    ],
    "extras_require": {"test": ["pytest", "hypothesis"]},
    "entry_points": {"console_scripts": ["lpmink = lpmink.main:main"]},
}

setup(**kwargs)
