import pytest

from dske.errors import ScriptError
from dske.scenarios import bundled_scenarios, load_scenario, parse_scenario

BUNDLED = bundled_scenarios()


def test_corpus_is_bundled():
    assert len(BUNDLED) >= 20


@pytest.mark.parametrize("path", BUNDLED, ids=[p.stem for p in BUNDLED])
def test_bundled_scenario_verdicts(path):
    scenario = load_scenario(path)
    _, verdicts = scenario.run()
    assert verdicts
    failed = [v.line() for v in verdicts if not v.ok]
    assert not failed, failed


def test_n9_sweep_boundary_is_five():
    scenario = load_scenario(next(p for p in BUNDLED if p.stem == "threshold_sweep_n9"))
    assert (scenario.params.n, scenario.params.k, scenario.params.kb) == (9, 5, 5)
    assert scenario.sweep["boundary"] == 5


@pytest.mark.parametrize(
    "data",
    [
        [],
        {"name": "no params"},
        {"params": {"n": 3, "k": 2}, "bogus": 1},
        {"params": {"n": 3, "k": 4}},
        {"params": {"n": 3, "k": 2, "colour": "red"}},
        {"params": {"n": 3, "k": 2}, "links": [{"link": "P1->B"}]},
        {"params": {"n": 3, "k": 2}, "links": [{"link": "P1->B", "action": "drop", "when": 3}]},
        {"params": {"n": 3, "k": 2}, "links": [{"link": "P1->B", "action": "inject", "frame": "zz"}]},
        {"params": {"n": 3, "k": 2}, "links": [{"link": "P1->B", "action": "corrupt", "positions": []}]},
        {"params": {"n": 3, "k": 2}, "compromised": {"P7": "junk"}},
        {"params": {"n": 3, "k": 2}, "expect": {"colour": 1}},
        {"params": {"n": 3, "k": 2}, "seed": "seven"},
        {"params": {"n": 3, "k": 2}, "sweep": {"strategies": ["drop"]}},
        {"params": {"n": 3, "k": 2}, "sweep": {"boundary": 2, "strategies": ["nuke"]}},
    ],
)
def test_malformed_scenarios(data):
    with pytest.raises(ScriptError):
        parse_scenario(data)


def test_bad_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("params: {n: 3, k: [\n")
    with pytest.raises(ScriptError):
        load_scenario(path)


def test_failed_expectation_is_reported():
    scenario = parse_scenario({"params": {"n": 3, "k": 2}, "expect": {"B": "aborted"}})
    _, verdicts = scenario.run()
    assert [v.ok for v in verdicts if v.check.endswith(" B")] == [False]


def test_per_run_expectations():
    scenario = parse_scenario(
        {
            "params": {"n": 2, "k": 2, "m": 16},
            "runs": 2,
            "links": [{"link": "P1->B", "action": "drop", "run": 1}],
            "expect": [{"B": "agreed"}, {"B": "aborted(InsufficientShares)"}],
        }
    )
    _, verdicts = scenario.run()
    assert all(v.ok for v in verdicts)
