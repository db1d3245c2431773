from __future__ import annotations

import pytest

from wormtrace.patterns import default_ruleset
from wormtrace.report import run_analysis
from wormtrace.scenario import builtin_scenario, generate_logs


@pytest.fixture(scope="session")
def rules():
    return default_ruleset()


@pytest.fixture(scope="session")
def scenario_dirs(tmp_path_factory):
    """Generated corpora for the built-in scenarios, keyed A/B/C."""
    out = {}
    for which in "ABC":
        d = tmp_path_factory.mktemp(f"scenario_{which}")
        generate_logs(builtin_scenario(which), d)
        out[which] = d
    return out


@pytest.fixture(scope="session")
def reports(scenario_dirs):
    return {k: run_analysis([d]) for k, d in scenario_dirs.items()}
