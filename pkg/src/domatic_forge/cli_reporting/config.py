"""Flat key=value experiment configuration with a closed schema.

Unknown keys are hard errors so a typo cannot silently change an experiment.
`parse_config` and `ExperimentConfig.echo` round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

OPERATIONS = ("recolor", "pipeline", "oracle", "edge-corollary", "tail-graph-check")
GRAPH_KINDS = ("random-regular", "torus", "tail", "blocks")
LAWS = ("geometric", "uniform")


class ConfigError(ValueError):
    """A configuration is malformed or out of its documented range."""


@dataclass(frozen=True)
class GraphSpec:
    """Where the experiment's graph comes from: a file or a generator."""

    file: str | None = None
    kind: str | None = None
    n: int | None = None
    half_degree: int | None = None
    blocks: int | None = None
    block_size: int | None = None
    dims: tuple[int, ...] | None = None
    steps: tuple[tuple[int, ...], ...] | None = None
    universe: int | None = None
    length: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: an operation, its knobs, and a mandatory master seed."""

    operation: str
    seed: int
    out_dir: str
    graph: GraphSpec = GraphSpec()
    coloring_file: str | None = None
    k: int | None = None
    m: int | None = None
    law: str = "geometric"
    trials: int = 32
    stages: int | None = None
    tail_start: int = 1
    membership_cap: int = 3
    repair_rounds: int = 64
    threshold: int | None = None
    workers: int | None = None

    def echo(self) -> str:
        """Canonical text form; parse_config(echo()) reproduces this config."""
        lines = [f"operation = {self.operation}",
                 f"seed = {self.seed}",
                 f"out_dir = {self.out_dir}"]
        gs = self.graph
        if gs.file is not None:
            lines.append(f"graph.file = {gs.file}")
        if gs.kind is not None:
            lines.append(f"graph.kind = {gs.kind}")
        for key, val in (("n", gs.n), ("half_degree", gs.half_degree),
                         ("blocks", gs.blocks), ("block_size", gs.block_size),
                         ("universe", gs.universe), ("length", gs.length)):
            if val is not None:
                lines.append(f"graph.{key} = {val}")
        if gs.dims is not None:
            lines.append("graph.dims = " + ",".join(str(d) for d in gs.dims))
        if gs.steps is not None:
            lines.append("graph.steps = "
                         + ";".join(",".join(str(x) for x in s) for s in gs.steps))
        if self.coloring_file is not None:
            lines.append(f"coloring.file = {self.coloring_file}")
        for key, val in (("k", self.k), ("m", self.m)):
            if val is not None:
                lines.append(f"{key} = {val}")
        lines.append(f"law = {self.law}")
        lines.append(f"trials = {self.trials}")
        if self.stages is not None:
            lines.append(f"stages = {self.stages}")
        lines.append(f"n0 = {self.tail_start}")
        lines.append(f"t = {self.membership_cap}")
        lines.append(f"repair_rounds = {self.repair_rounds}")
        if self.threshold is not None:
            lines.append(f"threshold = {self.threshold}")
        if self.workers is not None:
            lines.append(f"workers = {self.workers}")
        return "\n".join(lines) + "\n"


def _int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, not {value!r}") from None


def _dims(key: str, value: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in value.split(","))
    except ValueError:
        raise ConfigError(f"{key} must be comma-separated integers, not {value!r}") from None


def _steps(key: str, value: str) -> tuple[tuple[int, ...], ...]:
    try:
        return tuple(tuple(int(x) for x in part.split(","))
                     for part in value.split(";"))
    except ValueError:
        raise ConfigError(f"{key} must be semicolon-separated integer vectors, "
                          f"not {value!r}") from None


_KEYS = {
    "operation": str, "seed": _int, "out_dir": str,
    "graph.file": str, "graph.kind": str, "graph.n": _int,
    "graph.half_degree": _int, "graph.blocks": _int, "graph.block_size": _int,
    "graph.dims": _dims, "graph.steps": _steps,
    "graph.universe": _int, "graph.length": _int,
    "coloring.file": str, "k": _int, "m": _int, "law": str, "trials": _int,
    "stages": _int, "n0": _int, "t": _int, "repair_rounds": _int,
    "threshold": _int, "workers": _int,
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config; every violation names its field."""
    seen: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = key.strip(), value.strip()
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if key in seen:
            raise ConfigError(f"duplicate config key {key!r}")
        conv = _KEYS[key]
        seen[key] = conv(key, value) if conv is not str else value

    def take(key, default=None):
        return seen.pop(key, default)

    operation = take("operation")
    if operation is None:
        raise ConfigError("operation is required")
    if operation not in OPERATIONS:
        raise ConfigError(f"operation must be one of {', '.join(OPERATIONS)}; "
                          f"got {operation!r}")
    seed = take("seed")
    if seed is None:
        raise ConfigError("seed is required (runs are never wall-clock seeded)")
    out_dir = take("out_dir")
    if out_dir is None:
        raise ConfigError("out_dir is required")

    graph = GraphSpec(
        file=take("graph.file"), kind=take("graph.kind"), n=take("graph.n"),
        half_degree=take("graph.half_degree"), blocks=take("graph.blocks"),
        block_size=take("graph.block_size"), dims=take("graph.dims"),
        steps=take("graph.steps"), universe=take("graph.universe"),
        length=take("graph.length"))
    config = ExperimentConfig(
        operation=operation, seed=seed, out_dir=out_dir, graph=graph,
        coloring_file=take("coloring.file"), k=take("k"), m=take("m"),
        law=take("law", "geometric"), trials=take("trials", 32),
        stages=take("stages"), tail_start=take("n0", 1),
        membership_cap=take("t", 3), repair_rounds=take("repair_rounds", 64),
        threshold=take("threshold"), workers=take("workers"))
    assert not seen
    validate_config(config)
    return config


def _require_graph(config: ExperimentConfig):
    gs = config.graph
    if (gs.file is None) == (gs.kind is None):
        raise ConfigError("exactly one of graph.file and graph.kind is required")
    if gs.file is not None:
        return
    if gs.kind not in GRAPH_KINDS:
        raise ConfigError(f"graph.kind must be one of {', '.join(GRAPH_KINDS)}; "
                          f"got {gs.kind!r}")
    need = {"random-regular": ("n", "half_degree"),
            "torus": ("dims", "steps"),
            "tail": ("universe", "length"),
            "blocks": ("blocks", "block_size", "half_degree")}[gs.kind]
    for field in need:
        if getattr(gs, field) is None:
            raise ConfigError(f"graph.{field} is required for graph.kind = {gs.kind}")


def validate_config(config: ExperimentConfig):
    if config.law not in LAWS:
        raise ConfigError(f"law must be one of {', '.join(LAWS)}; got {config.law!r}")
    if config.trials < 1:
        raise ConfigError("trials must be at least 1")
    if config.repair_rounds < 0:
        raise ConfigError("repair_rounds must be nonnegative")
    if config.workers is not None and config.workers < 1:
        raise ConfigError("workers must be at least 1")
    op = config.operation
    if op == "oracle":
        if config.k is None or config.k < 1:
            raise ConfigError("k must be at least 1 for the oracle operation")
        if config.m is None or config.m < 0:
            raise ConfigError("m must be nonnegative for the oracle operation")
        return
    if op == "tail-graph-check":
        gs = config.graph
        if gs.universe is None or gs.length is None:
            raise ConfigError("graph.universe and graph.length are required "
                              "for tail-graph-check")
        if config.threshold is not None and config.threshold < 0:
            raise ConfigError("threshold must be nonnegative")
        return
    _require_graph(config)
    if op == "recolor":
        if config.coloring_file is None:
            raise ConfigError("coloring.file is required for recolor")
        if config.k is None or config.k < 1:
            raise ConfigError("k must be at least 1 for recolor")
    elif op == "edge-corollary":
        if config.k is None or config.k < 1:
            raise ConfigError("k must be at least 1 for edge-corollary")
    elif op == "pipeline":
        if config.stages is None or config.stages < 2:
            raise ConfigError("stages must be at least 2 for pipeline")
        if config.k is None or config.k < 1:
            raise ConfigError("k (the target palette) must be at least 1 for pipeline")
        if not 0 <= config.tail_start < config.stages:
            raise ConfigError("n0 must lie in 0..stages-1")
        if config.membership_cap < 0:
            raise ConfigError("t must be nonnegative")
