import importlib

import pytest

MODULES = [
    "homoglab",
    "homoglab.lattice",
    "homoglab.media",
    "homoglab.coefficients",
    "homoglab.solvers",
    "homoglab.core",
    "homoglab.experiments",
    "homoglab.config",
    "homoglab.run",
    "homoglab.cli",
]


@pytest.mark.parametrize("name", MODULES)
def test_module_imports(name):
    assert importlib.import_module(name) is not None


def test_cli_help_lists_commands(capsys):
    from homoglab.cli import main

    with pytest.raises(SystemExit) as excinfo:
        main(["--help"])
    assert excinfo.value.code == 0
    assert "lemmaL" in capsys.readouterr().out
