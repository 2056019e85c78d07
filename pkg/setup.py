from setuptools import setup

setup(
    name='stabcred',
    version='0.1.0',
    description='Stablecoin credit risk engine',
    license='MIT',
    packages=['stabcred'],
    scripts=['stabcred.py'],
    entry_points={'console_scripts': ['stabcred=stabcred._cli:main']},
    install_requires=['numpy<2', 'colorama', 'tqdm'],
    zip_safe=False
)
