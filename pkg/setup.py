import setuptools




with open('README.rst', 'r') as f:
    description = f.read()

setuptools.setup(
    name='noisytree',
    version='0.0.1',
    author='',
    author_email='',
    packages=['noisytree'],
    description='Learn tree-structured Ising and Gaussian models from samples corrupted by unknown per-node noise',
    long_description=description,
    long_description_content_type='text/x-rst',
    license='MIT',
    python_requires='>=3.9',
    install_requires=[
        'networkx>=2.6',
        'numpy>=1.22',
        'scipy>=1.8',
    ],
    extras_require={
        'docs': ['sphinx>=5.0', 'sphinx_rtd_theme>=1.0'],
        'tests': ['pytest>=7.0'],
    },
    entry_points={
        'console_scripts': ['noisytree=noisytree.cli:main'],
    },
)
