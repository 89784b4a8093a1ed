"""Scenario files: JSON with a versioned ``schema`` field.

Validation errors carry a dotted field path (``script[3].route``) so a bad
config can be fixed without reading the loader.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ScenarioInvalid
from .ledger import Regime
from .mint import DENOMINATIONS

SCHEMA = "qmint.scenario/1"
NODE_KINDS = ("GroundStation", "Bank", "Satellite", "Repeater")
WALLET_KINDS = ("GroundStation", "Bank")
LINK_KINDS = ("SatelliteOptical", "Fiber", "Classical")
ATTACK_KINDS = ("InterceptResend", "FakeSeparablePair", "NoiseInjection")
OPS = ("mint", "teleport", "verify", "attack", "loan", "advance")


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: str
    coherence_time: float | None = None
    residual_ratio: float | None = None
    collapse_threshold: float = 0.9

    @property
    def has_wallet(self) -> bool:
        return self.kind in WALLET_KINDS


@dataclass(frozen=True)
class LinkSpec:
    id: str
    kind: str
    a: str
    b: str
    latency: float
    loss_prob: float = 0.0
    visibility: float = 1.0

    @property
    def quantum(self) -> bool:
        return self.kind != "Classical"

    def joins(self, x: str, y: str) -> bool:
        return {self.a, self.b} == {x, y}


@dataclass(frozen=True)
class Segment:
    """One elementary pair: emitted at ``source``, halves sent to ``a`` and ``b``."""

    source: str
    a: str
    b: str


@dataclass(frozen=True)
class Step:
    at: float
    op: str
    args: dict


@dataclass
class Scenario:
    seed: int
    regime: Regime
    nodes: dict[str, NodeSpec]
    links: dict[str, LinkSpec]
    routes: dict[str, tuple[Segment, ...]]
    script: list[Step]
    name: str = "scenario"
    m_existing: int = 0
    relend: bool = False
    until: float | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def quantum_link(self, x: str, y: str) -> LinkSpec | None:
        return next((l for l in self.links.values() if l.quantum and l.joins(x, y)), None)

    def classical_link(self, x: str, y: str) -> LinkSpec | None:
        return next((l for l in self.links.values() if not l.quantum and l.joins(x, y)), None)

    def with_seed(self, seed: int) -> Scenario:
        raw = dict(self.raw, seed=int(seed))
        return parse(raw)

    def digest(self) -> str:
        """Hash of the canonical config (seed included)."""
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _need(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise ScenarioInvalid(path, "expected an object")
    if key not in obj:
        raise ScenarioInvalid(f"{path}.{key}" if path else key, "missing field")
    return obj[key]


def _number(value, path: str, lo=None, hi=None, lo_open=False, hi_open=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioInvalid(path, f"expected a number, got {value!r}")
    v = float(value)
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ScenarioInvalid(path, f"{v} below allowed range")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise ScenarioInvalid(path, f"{v} above allowed range")
    return v


def _int(value, path: str, lo=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioInvalid(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ScenarioInvalid(path, f"{value} below {lo}")
    return value


def _choice(value, options, path: str) -> str:
    if value not in options:
        raise ScenarioInvalid(path, f"{value!r} not one of {list(options)}")
    return value


def _parse_node(obj: dict, path: str) -> NodeSpec:
    nid = _need(obj, "id", path)
    kind = _choice(_need(obj, "kind", path), NODE_KINDS, f"{path}.kind")
    wallet_fields = [k for k in ("coherence_time", "residual_ratio", "collapse_threshold") if k in obj]
    if kind not in WALLET_KINDS:
        if wallet_fields:
            raise ScenarioInvalid(f"{path}.{wallet_fields[0]}", f"{kind} nodes hold no wallet")
        return NodeSpec(nid, kind)
    tau = _number(obj.get("coherence_time", 1e9), f"{path}.coherence_time", lo=0, lo_open=True)
    ratio = obj.get("residual_ratio", 10.0)
    if ratio is not None:
        ratio = _number(ratio, f"{path}.residual_ratio", lo=0, lo_open=True)
    threshold = _number(obj.get("collapse_threshold", 0.9), f"{path}.collapse_threshold", lo=0, hi=1)
    return NodeSpec(nid, kind, tau, ratio, threshold)


def _parse_link(obj: dict, path: str, nodes: dict) -> LinkSpec:
    lid = _need(obj, "id", path)
    kind = _choice(_need(obj, "kind", path), LINK_KINDS, f"{path}.kind")
    ends = []
    for end in ("a", "b"):
        nid = _need(obj, end, path)
        if nid not in nodes:
            raise ScenarioInvalid(f"{path}.{end}", f"unknown node {nid!r}")
        ends.append(nid)
    latency = _number(_need(obj, "latency", path), f"{path}.latency", lo=0, lo_open=True)
    loss = _number(obj.get("loss_prob", 0.0), f"{path}.loss_prob", lo=0, hi=1, hi_open=True)
    vis = _number(obj.get("visibility", 1.0), f"{path}.visibility", lo=0, hi=1)
    return LinkSpec(lid, kind, ends[0], ends[1], latency, loss, vis)


def _parse_route(segments, path: str, sc: Scenario) -> tuple[Segment, ...]:
    if not isinstance(segments, list) or not segments:
        raise ScenarioInvalid(path, "a route is a non-empty list of segments")
    out = []
    for i, seg in enumerate(segments):
        p = f"{path}[{i}]"
        ids = {}
        for key in ("source", "a", "b"):
            nid = _need(seg, key, p)
            if nid not in sc.nodes:
                raise ScenarioInvalid(f"{p}.{key}", f"unknown node {nid!r}")
            ids[key] = nid
        if sc.nodes[ids["source"]].kind not in ("Satellite", "Repeater"):
            raise ScenarioInvalid(f"{p}.source", "pairs are emitted by Satellite or Repeater nodes")
        for end in ("a", "b"):
            if ids[end] != ids["source"] and sc.quantum_link(ids["source"], ids[end]) is None:
                raise ScenarioInvalid(f"{p}.{end}", f"no quantum link {ids['source']} -> {ids[end]}")
        if out:
            if out[-1].b != ids["a"]:
                raise ScenarioInvalid(f"{p}.a", "segments must chain end to end")
            if sc.nodes[ids["a"]].kind != "Repeater":
                raise ScenarioInvalid(f"{p}.a", "segments can only be joined at a Repeater")
        out.append(Segment(**ids))
    return tuple(out)


def _check_step(step: Step, path: str, sc: Scenario) -> None:
    a = step.args

    def node(key, wallet=False):
        nid = _need(a, key, path)
        if nid not in sc.nodes:
            raise ScenarioInvalid(f"{path}.{key}", f"unknown node {nid!r}")
        if wallet and not sc.nodes[nid].has_wallet:
            raise ScenarioInvalid(f"{path}.{key}", f"{nid} holds no wallet")
        return nid

    def route(key="route"):
        name = _need(a, key, path)
        if name not in sc.routes:
            raise ScenarioInvalid(f"{path}.{key}", f"unknown route {name!r}")
        return sc.routes[name]

    if step.op == "mint":
        if sc.regime is not Regime.Quantum:
            raise ScenarioInvalid(f"{path}.op", "minting belongs to the Quantum regime")
        node("bank", wallet=True)
        denom = _int(_need(a, "denomination", path), f"{path}.denomination")
        if denom not in DENOMINATIONS:
            raise ScenarioInvalid(f"{path}.denomination", f"{denom} is not a denomination")
        _int(a.get("count", 1), f"{path}.count", lo=1)
    elif step.op == "teleport":
        src, dst = node("from", wallet=True), node("to", wallet=True)
        segs = route()
        if {segs[0].a, segs[-1].b} != {src, dst}:
            raise ScenarioInvalid(f"{path}.route", f"route does not join {src} and {dst}")
        if sc.classical_link(src, dst) is None:
            raise ScenarioInvalid(f"{path}.to", f"no classical link {src} -> {dst}")
        _int(_need(a, "denomination", path), f"{path}.denomination")
    elif step.op == "verify":
        route()
        _int(a.get("trials", 10_000), f"{path}.trials", lo=100)
        _choice(a.get("mode", "CHSH"), ("CHSH", "Correlation"), f"{path}.mode")
        if "verifier" in a:
            node("verifier")
    elif step.op == "attack":
        lid = _need(a, "link", path)
        if lid not in sc.links:
            raise ScenarioInvalid(f"{path}.link", f"unknown link {lid!r}")
        if not sc.links[lid].quantum:
            raise ScenarioInvalid(f"{path}.link", "attacks act on quantum links only")
        kind = _choice(_need(a, "kind", path), ATTACK_KINDS, f"{path}.kind")
        if kind == "NoiseInjection":
            _number(_need(a.get("params", {}), "factor", f"{path}.params"), f"{path}.params.factor", lo=0, hi=1)
    elif step.op == "loan":
        node("bank", wallet=True)
        _int(_need(a, "amount", path), f"{path}.amount", lo=1)
        if sc.regime is Regime.Quantum:
            borrower = node("borrower", wallet=True)
            segs = route()
            if {segs[0].a, segs[-1].b} != {a["bank"], borrower}:
                raise ScenarioInvalid(f"{path}.route", "route does not join lender and borrower")
            if sc.classical_link(a["bank"], borrower) is None:
                raise ScenarioInvalid(f"{path}.borrower", "no classical link to borrower")
    elif step.op == "advance":
        pass


def parse(obj: dict) -> Scenario:
    if not isinstance(obj, dict):
        raise ScenarioInvalid("", "scenario must be a JSON object")
    schema = _need(obj, "schema", "")
    if schema != SCHEMA:
        raise ScenarioInvalid("schema", f"unsupported schema {schema!r}, expected {SCHEMA!r}")
    seed = _int(_need(obj, "seed", ""), "seed", lo=0)
    if seed >= 2**64:
        raise ScenarioInvalid("seed", "seed must fit in 64 bits")
    regime = Regime(_choice(obj.get("regime", "Quantum"), ("Quantum", "Classical"), "regime"))
    sc = Scenario(
        seed=seed,
        regime=regime,
        nodes={},
        links={},
        routes={},
        script=[],
        name=str(obj.get("name", "scenario")),
        m_existing=_int(obj.get("m_existing", 0), "m_existing", lo=0),
        relend=bool(obj.get("relend", False)),
        raw=obj,
    )
    if obj.get("until") is not None:
        sc.until = _number(obj["until"], "until", lo=0)
    for i, n in enumerate(obj.get("nodes", [])):
        spec = _parse_node(n, f"nodes[{i}]")
        if spec.id in sc.nodes:
            raise ScenarioInvalid(f"nodes[{i}].id", f"duplicate node {spec.id!r}")
        sc.nodes[spec.id] = spec
    for i, l in enumerate(obj.get("links", [])):
        spec = _parse_link(l, f"links[{i}]", sc.nodes)
        if spec.id in sc.links:
            raise ScenarioInvalid(f"links[{i}].id", f"duplicate link {spec.id!r}")
        sc.links[spec.id] = spec
    routes = obj.get("routes", {})
    if not isinstance(routes, dict):
        raise ScenarioInvalid("routes", "expected an object of named routes")
    for name, segs in routes.items():
        sc.routes[name] = _parse_route(segs, f"routes.{name}", sc)
    last = 0.0
    for i, s in enumerate(obj.get("script", [])):
        path = f"script[{i}]"
        at = _number(_need(s, "at", path), f"{path}.at", lo=0)
        if at < last:
            raise ScenarioInvalid(f"{path}.at", f"{at} precedes the previous step at {last}")
        last = at
        op = _choice(_need(s, "op", path), OPS, f"{path}.op")
        step = Step(at, op, {k: v for k, v in s.items() if k not in ("at", "op")})
        _check_step(step, path, sc)
        sc.script.append(step)
    return sc


def load(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid(f"line {exc.lineno}", exc.msg) from None
    return parse(obj)


def bundled_names() -> list[str]:
    root = resources.files("qmint") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled(name: str) -> Scenario:
    text = (resources.files("qmint") / "scenarios" / f"{name}.json").read_text()
    return parse(json.loads(text))


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("qmint") / "scenarios" / f"{name}.json"))
