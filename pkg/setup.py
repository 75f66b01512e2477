from setuptools import setup, find_packages

setup(
    name="scg-emotion",
    version="0.1.0",
    description="scg-emotion - Single-trial valence/arousal classification from seismocardiography and other physiological signals.",
    package_dir={'': 'src'},
    packages=find_packages(where='src'),
    python_requires=">=3.8",
    entry_points={
        'console_scripts': [
            'scg-emotion=app.commands.command_line:main',
        ],
    },
    install_requires=[
        "numpy>=1.21",
        "scipy>=1.8",
        "pandas>=1.4",
        "scikit-learn>=1.1",
        "neurokit2>=0.2.4",
        "rich>=12.0.0",
    ],
    extras_require={
        'test': ["pytest>=7.0"],
    },
)
