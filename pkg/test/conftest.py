import pytest


# Moves working directory to test file directory
@pytest.fixture(autouse=True)
def change_test_dir(request, monkeypatch):
    monkeypatch.chdir(request.fspath.dirname)


# Set kernel mode (python, numba); lpmink.main reads the same flag from sys.argv
def pytest_addoption(parser):
    parser.addoption(
        "--kernel", action="store", default="python", choices=("python", "numba")
    )


@pytest.fixture(scope="session")
def kernel(pytestconfig):
    return pytestconfig.getoption("kernel")
