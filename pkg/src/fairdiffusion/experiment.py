"""Batch experiments over generated networks, emitted as CSV."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .graph import Network
from .instances import (
    GeneratorSpec,
    InstanceError,
    ValuationSpec,
    format_rational,
    generate_network,
    load_instance,
)
from .verifier import MechanismMetrics, check_table1_metrics, instance_seeds

KEY_COLUMNS = ["seed", "generator", "n", "mechanism"]
METRIC_COLUMNS = [
    "winner_id",
    "social_welfare",
    "revenue",
    "total_buyer_utility",
    "beneficial_buyers",
    "critical_ancestors",
    "beneficial_ratio",
    "beneficial_ratio_decimal",
]
KNOWN_MECHANISMS = ("fdm", "idm", "vcg")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorSpec | None
    valuations: ValuationSpec = field(default_factory=ValuationSpec)
    count: int = 10
    seed: int = 0
    mechanisms: tuple = ("fdm", "idm")
    metrics: tuple = tuple(METRIC_COLUMNS)
    instance: str | None = None

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ConfigError("count must be at least 1")
        if (self.generator is None) == (self.instance is None):
            raise ConfigError("give exactly one of 'generator' or 'instance'")
        unknown = set(self.mechanisms) - set(KNOWN_MECHANISMS)
        if unknown or not self.mechanisms:
            raise ConfigError(f"unknown or empty mechanism list: {sorted(unknown)}")
        bad = set(self.metrics) - set(METRIC_COLUMNS)
        if bad:
            raise ConfigError(f"unknown metrics {sorted(bad)}")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        try:
            gen = data.get("generator")
            return cls(
                generator=GeneratorSpec(**gen) if gen else None,
                valuations=ValuationSpec(**data.get("valuations", {})),
                count=int(data.get("count", 10)),
                seed=int(data.get("seed", 0)),
                mechanisms=tuple(data.get("mechanisms", ("fdm", "idm"))),
                metrics=tuple(data.get("metrics", METRIC_COLUMNS)),
                instance=data.get("instance"),
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        config = cls.from_dict(data)
        if config.instance is not None and not Path(config.instance).is_absolute():
            rel = str(Path(path).parent / config.instance)
            return cls(**{**config.__dict__, "instance": rel})
        return config

    @property
    def label(self) -> str:
        if self.generator is None:
            return "file"
        return self.generator.kind

    def networks(self) -> list[tuple[int, Network]]:
        if self.instance is not None:
            net = load_instance(self.instance)
            return [(s, net) for s in instance_seeds(self.seed, self.count)]
        return [
            (s, generate_network(self.generator, self.valuations, s))
            for s in instance_seeds(self.seed, self.count)
        ]


def _fmt(value: Any) -> str:
    if isinstance(value, Fraction):
        return format_rational(value)
    return "" if value is None else str(value)


def metric_row(seed: Any, label: str, network: Network, m: MechanismMetrics) -> dict:
    return {
        "seed": seed,
        "generator": label,
        "n": len(network.valuation),
        "mechanism": m.mechanism,
        "winner_id": m.winner,
        "social_welfare": m.social_welfare,
        "revenue": m.revenue,
        "total_buyer_utility": m.total_utility,
        "beneficial_buyers": m.beneficial_count,
        "critical_ancestors": m.critical_ancestors,
        "beneficial_ratio": m.beneficial_ratio,
        "beneficial_ratio_decimal": f"{float(m.beneficial_ratio):.2f}",
    }


def rows_for_network(
    seed: Any, label: str, network: Network, mechanisms: Sequence[str]
) -> list[dict]:
    metrics = check_table1_metrics(network, mechanisms)
    return [metric_row(seed, label, network, metrics[name]) for name in mechanisms]


def _instance_rows(args: tuple) -> list[dict]:
    seed, label, network, mechanisms = args
    return rows_for_network(seed, label, network, mechanisms)


def summary_rows(rows: list[dict], mechanisms: Sequence[str]) -> list[dict]:
    out = []
    for name in mechanisms:
        mine = [r for r in rows if r["mechanism"] == name]
        row: dict = {"seed": "mean", "generator": mine[0]["generator"], "mechanism": name}
        row["n"] = Fraction(sum(r["n"] for r in mine), len(mine))
        for col in METRIC_COLUMNS:
            if col in ("winner_id", "beneficial_ratio_decimal"):
                continue
            row[col] = Fraction(sum((Fraction(r[col]) for r in mine), Fraction(0)), len(mine))
        row["winner_id"] = ""
        row["beneficial_ratio_decimal"] = f"{float(row['beneficial_ratio']):.2f}"
        out.append(row)
    return out


def run_experiment(config: ExperimentConfig, workers: int = 1) -> list[dict]:
    """Per-instance rows in seed order followed by one mean row per mechanism."""
    try:
        jobs = [(s, config.label, net, config.mechanisms) for s, net in config.networks()]
    except InstanceError as exc:
        raise ConfigError(str(exc)) from None
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            batches = list(pool.map(_instance_rows, jobs))
    else:
        batches = [_instance_rows(job) for job in jobs]
    rows = [row for batch in batches for row in batch]
    return rows + summary_rows(rows, config.mechanisms)


def to_csv(rows: list[dict], metrics: Sequence[str] = METRIC_COLUMNS) -> str:
    columns = KEY_COLUMNS + [c for c in METRIC_COLUMNS if c in metrics]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()
