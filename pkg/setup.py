import setuptools


setuptools.setup(
    name='qdisplace',
    package_data={
        'qdisplace': ['py.typed']
    }
)
