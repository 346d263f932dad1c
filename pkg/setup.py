from setuptools import setup, find_packages

setup(
    name="foliatrace",
    # A versão é gerenciada pelo setuptools_scm
    packages=find_packages(where=".", include=["foliatrace", "foliatrace.*"]),
    package_dir={"": "."},
    install_requires=[
        'numpy>=1.22',
        'pandas>=1.5',  # to_csv(lineterminator=...)
        'scipy>=1.9',   # eigh(subset_by_index=...), solve_ivp com eventos
        'setuptools',
        'tqdm',
        'pytest>=7.0.0',
        'pytest-mock>=3.10.0',
        'pytest-cov>=4.0.0',
    ],
    entry_points={"console_scripts": ["foliatrace=foliatrace.cli:main"]},
    python_requires='>=3.9',
    description="Laboratório numérico de traços de onda básicos em folheações de suspensão",
    long_description=open('README.md', encoding='utf-8').read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
)
