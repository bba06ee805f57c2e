"""
conftest.py

Purpose:
    Shared pytest configuration: registers the "slow" marker used by the convergence studies.
"""


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running convergence studies")
