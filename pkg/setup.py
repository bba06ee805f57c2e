from setuptools import setup, find_packages

setup(
    name='lowmachlab',
    version='0.1.0',
    description='Low-Mach pseudo-spectral simulator and verification lab',
    packages=find_packages(exclude=['tests', 'tests.*']),
    py_modules=['cli'],
    install_requires=[
        'numpy>=1.24',
        'scipy>=1.10',
        'click>=8.1',
    ],
    tests_require=['pytest'],
    python_requires='>=3.9',
    entry_points={
        'console_scripts': [
            'lowmach=cli:main',
        ],
    },
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
    ],
)
