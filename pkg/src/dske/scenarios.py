"""Declarative attack scenarios (YAML) and their verdicts.

Schema (every key except ``params`` is optional)::

    name: short title
    description: free text
    seed: 7                       # run seed, default 0
    runs: 1                       # consecutive runs over the same tables
    topology: {hubs: 3, table_size: 65536, request_cap: 2}
    params: {n: 3, k: 2, kb: 2, m: 64, scheme: shamir, adapted: false, identity: false}
    compromised: {P1: junk}       # hub -> passive|withhold|junk|forge_group|splice|lie_identity
    forge_k: 2                    # threshold claimed by a forged share group
    links:                        # first matching rule wins; unmatched frames are delivered
      - {link: P1->B, action: drop}
      - {link: P2->B, action: corrupt, positions: [-41], mask: 1}
      - {link: A->P1, action: replay, to: A->P2, index: 0}
      - {link: P1->B, action: replay, into_run: 1}
      - {link: A->P3, action: reorder}
      - {link: P3->B, action: inject, frame: "<hex>"}
      # optional per rule: run (only in that run), index (nth frame on the link)
    expect:                       # one mapping for every run, or a list with one per run
      A: agreed                   # agreed | aborted | aborted(Reason)
      B: aborted(InjectionDetected)
      same_key: false
      wrong_key: false            # checked as false unless stated
      leaked: true
      rejections: [B:TagInvalid]  # "where:Error" or just "Error"; all must occur
      excluded: [P1]
    sweep:                        # replaces the single run with a threshold sweep
      strategies: [drop, corrupt, forge]
      boundary: 5                 # expected smallest failing disrupted-hub count
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .errors import ScriptError
from .simnet import (
    STRATEGIES,
    AdversaryScript,
    LinkRule,
    ProtocolParams,
    RunOutcome,
    RunReport,
    Topology,
    boundary,
    disruption_sweep,
    run_scenario,
)

_TOP_KEYS = {"name", "description", "seed", "runs", "topology", "params", "compromised", "forge_k", "links", "expect", "sweep"}
_RULE_KEYS = {"link", "action", "run", "index", "positions", "mask", "to", "into_run", "frame"}
_EXPECT_KEYS = {"A", "B", "same_key", "wrong_key", "leaked", "rejections", "excluded"}


@dataclass
class Verdict:
    check: str
    expected: Any
    actual: Any

    @property
    def ok(self) -> bool:
        return self.expected == self.actual

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.check}: expected {self.expected!r}, got {self.actual!r}"


@dataclass
class Scenario:
    name: str
    params: ProtocolParams
    topology: Topology
    script: AdversaryScript
    seed: int = 0
    runs: int = 1
    expect: list[dict[str, Any]] = field(default_factory=list)
    sweep: dict[str, Any] | None = None
    description: str = ""

    def run(self) -> tuple[RunReport | None, list[Verdict]]:
        if self.sweep is not None:
            return None, self._run_sweep()
        report = run_scenario(self.topology, self.script, self.params, self.seed, runs=self.runs)
        verdicts = []
        for i, outcome in enumerate(report.outcomes):
            expect = self.expect[i] if i < len(self.expect) else (self.expect[-1] if self.expect else {})
            verdicts.extend(_judge(i, outcome, expect, report))
        return report, verdicts

    def _run_sweep(self) -> list[Verdict]:
        p = self.params
        strategies = self.sweep.get("strategies", list(STRATEGIES))
        rows = disruption_sweep(p.n, p.k, p.kb, strategies=strategies, m=p.m, seed=self.seed)
        verdicts = [Verdict("sweep boundary", self.sweep.get("boundary"), boundary(rows))]
        verdicts.append(Verdict("sweep rows", p.n + 1, len(rows)))
        return verdicts


def _outcome_matches(pattern: str, actual: str) -> bool:
    if pattern == "aborted":
        return actual.startswith("aborted")
    return pattern == actual


def _judge(run: int, outcome: RunOutcome, expect: dict[str, Any], report: RunReport) -> list[Verdict]:
    out = []
    for party, key in (("A", outcome.alice), ("B", outcome.bob)):
        if party in expect:
            actual = key.outcome()
            shown = expect[party] if _outcome_matches(expect[party], actual) else actual
            out.append(Verdict(f"run {run} {party}", expect[party], shown))
    for flag in ("same_key", "leaked"):
        if flag in expect:
            out.append(Verdict(f"run {run} {flag}", bool(expect[flag]), getattr(outcome, flag)))
    out.append(Verdict(f"run {run} wrong_key", bool(expect.get("wrong_key", False)), outcome.wrong_key))
    for needed in expect.get("rejections", []):
        seen = any(d == needed or d.endswith(":" + needed) for d in report.diagnostics)
        out.append(Verdict(f"run {run} rejection {needed}", True, seen))
    if "excluded" in expect:
        out.append(Verdict(f"run {run} excluded", sorted(expect["excluded"]), sorted(outcome.excluded)))
    return out


def _int(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScriptError(f"{what} must be an integer, got {value!r}")
    return value


def _rule(raw: Any) -> LinkRule:
    if not isinstance(raw, dict) or not {"link", "action"} <= set(raw):
        raise ScriptError(f"link rule needs 'link' and 'action': {raw!r}")
    unknown = set(raw) - _RULE_KEYS
    if unknown:
        raise ScriptError(f"unknown link rule keys {sorted(unknown)}")
    kwargs: dict[str, Any] = {"link": str(raw["link"]), "action": str(raw["action"])}
    for key in ("run", "index", "into_run", "mask"):
        if key in raw:
            kwargs[key] = _int(raw[key], key)
    if "to" in raw:
        kwargs["to"] = str(raw["to"])
    if "positions" in raw:
        if not isinstance(raw["positions"], list) or not raw["positions"]:
            raise ScriptError("positions must be a non-empty list")
        kwargs["positions"] = tuple(_int(p, "position") for p in raw["positions"])
    if "frame" in raw:
        try:
            kwargs["frame"] = bytes.fromhex(str(raw["frame"]))
        except ValueError as exc:
            raise ScriptError(f"frame is not hex: {exc}") from None
    return LinkRule(**kwargs)


def parse_scenario(data: Any) -> Scenario:
    if not isinstance(data, dict):
        raise ScriptError("a scenario must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ScriptError(f"unknown scenario keys {sorted(unknown)}")
    if not isinstance(data.get("params"), dict):
        raise ScriptError("scenario needs a 'params' mapping")
    try:
        params = ProtocolParams(**data["params"])
    except TypeError as exc:
        raise ScriptError(f"bad params: {exc}") from None
    except ValueError as exc:
        raise ScriptError(f"bad params: {exc}") from None
    topo = data.get("topology", {}) or {}
    if not isinstance(topo, dict):
        raise ScriptError("topology must be a mapping")
    hubs = topo.get("hubs", params.n)
    table_size = _int(topo.get("table_size", 1 << 16), "table_size")
    cap = topo.get("request_cap")
    cap = None if cap is None else _int(cap, "request_cap")
    if isinstance(hubs, list):
        topology = Topology(tuple(map(str, hubs)), table_size, cap)
    else:
        topology = Topology.with_hubs(_int(hubs, "hubs"), table_size, cap)
    compromised = data.get("compromised", {}) or {}
    if not isinstance(compromised, dict):
        raise ScriptError("compromised must map hub names to behaviours")
    links = data.get("links", []) or []
    if not isinstance(links, list):
        raise ScriptError("links must be a list of rules")
    script = AdversaryScript(
        compromised={str(h): str(b) for h, b in compromised.items()},
        rules=[_rule(r) for r in links],
        forge_k=_int(data["forge_k"], "forge_k") if "forge_k" in data else None,
    )
    script.validate(topology)
    expect = data.get("expect", [])
    expect = [expect] if isinstance(expect, dict) else list(expect or [])
    for e in expect:
        if not isinstance(e, dict) or set(e) - _EXPECT_KEYS:
            raise ScriptError(f"bad expect block {e!r}")
    sweep = data.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or "boundary" not in sweep:
            raise ScriptError("sweep needs an expected 'boundary'")
        if set(sweep.get("strategies", [])) - set(STRATEGIES):
            raise ScriptError(f"sweep strategies must come from {STRATEGIES}")
    return Scenario(
        name=str(data.get("name", "unnamed")),
        description=str(data.get("description", "")),
        params=params,
        topology=topology,
        script=script,
        seed=_int(data.get("seed", 0), "seed"),
        runs=_int(data.get("runs", 1), "runs"),
        expect=expect,
        sweep=sweep,
    )


def load_scenario(source: str | os.PathLike) -> Scenario:
    try:
        data = yaml.safe_load(Path(source).read_text())
    except yaml.YAMLError as exc:
        raise ScriptError(f"scenario is not valid YAML: {exc}") from None
    return parse_scenario(data)


def bundled_scenarios() -> list[Path]:
    root = resources.files("dske") / "scenarios"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".yaml"))
