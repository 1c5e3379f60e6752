"""Experiment configs, parameter sweeps and CSV output."""

from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .analytics import network_freshness
from .model import CHAIN, MULTIUSER, SINGLE, RateAllocation, SourceProfile, Topology, check
from .optimizer import BASELINES, OptimizerSettings, alternating_maximize, baseline_allocation, kkt_residuals
from .simulator import BACKEND, SimConfig, simulate_system

OPTIMAL = "optimal"
GIVEN = "given"
POLICIES = (OPTIMAL,) + BASELINES

COLUMNS = (
    "scenario_id", "sweep_param", "sweep_value", "policy", "node", "file_index",
    "lambda", "rate", "freshness_analytic", "freshness_sim_mean", "freshness_sim_ci",
    "total_objective", "kkt_residual", "iterations",
)


class ConfigError(ValueError):
    pass


def geometric_lambdas(a: float, q: float, n: int) -> np.ndarray:
    """Rates ``b * q**i`` for ``i = 1..n``, scaled so they sum to ``a``."""
    if not a > 0:
        raise ValueError("total rate a must be positive")
    if not 0 < q <= 1:
        raise ValueError("decay q must lie in (0, 1]")
    if n < 1:
        raise ValueError("need at least one file")
    powers = q ** np.arange(1, n + 1)
    lam = a * powers / powers.sum()
    # absorb the rounding residue so the rates sum to a
    lam[0] += a - lam.sum()
    return lam


@dataclass
class ScenarioConfig:
    scenario_id: str
    source: dict[str, Any]
    topology: dict[str, Any]
    optimizer: dict[str, Any] = field(default_factory=dict)
    policies: list[str] = field(default_factory=lambda: [OPTIMAL])
    simulation: dict[str, Any] | None = None
    sweeps: list[dict[str, list]] = field(default_factory=list)
    allocation: dict[str, Any] | None = None
    output: str | None = None

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ScenarioConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        for key in ("scenario_id", "source", "topology"):
            if key not in raw:
                raise ConfigError(f"config is missing {key!r}")
        cfg = cls(**copy.deepcopy(raw))
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict[str, Any]:
        return {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}

    def check(self) -> None:
        for policy in self.policies:
            if policy not in POLICIES + (GIVEN,):
                raise ConfigError(f"unknown policy {policy!r}")
        for group in self.sweeps:
            if not group:
                raise ConfigError("empty sweep group")
            for name, values in group.items():
                if not values:
                    raise ConfigError(f"sweep over {name!r} has no values")
        # every sweep point must build
        for point in self.points():
            self.build(point)

    def points(self) -> list[dict[str, float]]:
        if not self.sweeps:
            return [{}]
        out = []
        for group in self.sweeps:
            names = list(group)
            for combo in itertools.product(*(group[k] for k in names)):
                out.append(dict(zip(names, combo)))
        return out

    def build(self, point: dict[str, float] | None = None) -> tuple[SourceProfile, Topology]:
        """Profile and topology at one sweep point."""
        point = point or {}
        src = dict(self.source)
        topo = copy.deepcopy(self.topology)
        for name, value in point.items():
            if name in ("a", "q", "n"):
                geo = dict(src.get("geometric") or {})
                if not geo:
                    raise ConfigError(f"sweep over {name!r} needs a geometric source")
                geo[name] = int(value) if name == "n" else float(value)
                src["geometric"] = geo
            elif name[0] in "CU":
                key = "cache_budgets" if name[0] == "C" else "user_budgets"
                idx = int(name[1:]) - 1 if len(name) > 1 else 0
                budgets = list(topo.get(key, []))
                if not 0 <= idx < len(budgets):
                    raise ConfigError(f"sweep parameter {name!r} has no matching budget")
                budgets[idx] = float(value)
                topo[key] = budgets
            else:
                raise ConfigError(f"unknown sweep parameter {name!r}")

        if "lambdas" in src:
            lam = np.array(src["lambdas"], dtype=float)
        elif "geometric" in src:
            g = src["geometric"]
            try:
                lam = geometric_lambdas(float(g["a"]), float(g["q"]), int(g["n"]))
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"bad geometric source: {exc}") from exc
        else:
            raise ConfigError("source needs 'lambdas' or 'geometric'")
        profile = SourceProfile(lam, src.get("weights"), src.get("cache_success"), src.get("user_success"))

        kind = topo.get("kind", SINGLE)
        if kind not in (SINGLE, CHAIN, MULTIUSER):
            raise ConfigError(f"unknown topology kind {kind!r}")
        topology = Topology(kind, topo.get("cache_budgets", ()), topo.get("user_budgets", ()), profile.n)
        errs = profile.errors() + topology.errors()
        if errs:
            raise ConfigError("infeasible scenario: " + "; ".join(errs))
        return profile, topology

    def settings(self) -> OptimizerSettings:
        return OptimizerSettings(**self.optimizer)

    def sim_config(self, seed: int | None = None) -> SimConfig | None:
        if self.simulation is None:
            return None
        sim = dict(self.simulation)
        if seed is not None:
            sim["seed"] = seed
        return SimConfig(**sim)

    def given_allocation(self, topo: Topology) -> RateAllocation:
        if self.allocation is None:
            raise ConfigError("config has no 'allocation' section")
        n = topo.n
        return RateAllocation(
            np.array(self.allocation["cache_rates"], dtype=float).reshape(topo.m, n),
            np.array(self.allocation["user_rates"], dtype=float).reshape(topo.d, n),
        )


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "0" if v == 0 else f"{v:.12g}"
    return str(value)


def _point_label(point: dict[str, float]) -> tuple[str, str]:
    return ";".join(point), ";".join(_fmt(float(v)) for v in point.values())


def _allocate(cfg: ScenarioConfig, policy: str, profile, topo):
    if policy == OPTIMAL:
        alloc, trace = alternating_maximize(topo, profile, cfg.settings())
        return alloc, trace.iterations_used
    if policy == GIVEN:
        return cfg.given_allocation(topo), None
    return baseline_allocation(policy, topo, profile), None


def evaluate_point(cfg: ScenarioConfig, point: dict[str, float], policy: str,
                   seed: int | None = None) -> list[dict[str, Any]]:
    """Rows for one (sweep point, policy): one per node and file, then a total row."""
    profile, topo = cfg.build(point)
    alloc, iterations = _allocate(cfg, policy, profile, topo)
    check(profile, topo, alloc)
    table = network_freshness(profile, alloc)
    resid = kkt_residuals(topo, profile, alloc)
    total = float((table[topo.m:] @ profile.weights).sum())

    sim_cfg = cfg.sim_config(seed)
    sim = simulate_system(profile, topo, alloc, sim_cfg) if sim_cfg else None

    param, value = _point_label(point)
    base = {"scenario_id": cfg.scenario_id, "sweep_param": param, "sweep_value": value, "policy": policy}
    rows = []
    for row, node in enumerate(topo.nodes):
        rates = alloc.rates(node)
        for i in range(topo.n):
            rows.append({
                **base,
                "node": node.label,
                "file_index": i + 1,
                "lambda": profile.lambdas[i],
                "rate": rates[i],
                "freshness_analytic": table[row, i],
                "freshness_sim_mean": sim.mean[row, i] if sim else None,
                "freshness_sim_ci": sim.half_width[row, i] if sim else None,
                "kkt_residual": resid[row],
            })
    rows.append({
        **base,
        "node": "total",
        "total_objective": total,
        "freshness_sim_mean": sim.grand_total if sim else None,
        "freshness_sim_ci": sim.grand_total_hw if sim else None,
        "kkt_residual": float(resid.max()),
        "iterations": iterations,
    })
    return rows


def run_scenario(cfg: ScenarioConfig, seed: int | None = None,
                 policies: list[str] | None = None) -> list[dict[str, Any]]:
    """All rows of a scenario, ordered by sweep point, then policy, then node and file."""
    rows = []
    for point in cfg.points():
        for policy in policies or cfg.policies:
            rows.extend(evaluate_point(cfg, point, policy, seed))
    return rows


def rows_to_csv(rows: list[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(col)) for col in COLUMNS])
    return buf.getvalue()


def write_outputs(rows: list[dict[str, Any]], out: str | Path, cfg: ScenarioConfig,
                  seed: int | None, command: str) -> Path:
    """Write the CSV and a JSON manifest next to it; returns the manifest path."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(rows_to_csv(rows))
    manifest = out.with_name(out.stem + ".manifest.json")
    manifest.write_text(json.dumps({
        "command": command,
        "config": cfg.to_dict(),
        "seed": seed,
        "csv": out.name,
        "rows": len(rows),
        "versions": {
            "cachefresh": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "simulator_backend": BACKEND,
        },
    }, indent=2, sort_keys=True) + "\n")
    return manifest


def _geo(a, q, n):
    return {"geometric": {"a": a, "q": q, "n": n}}


PRESETS: dict[str, dict[str, Any]] = {
    "example1": {
        "scenario_id": "example1",
        "source": _geo(10, 0.7, 15),
        "topology": {"kind": SINGLE, "cache_budgets": [5], "user_budgets": [10]},
        "policies": [OPTIMAL],
    },
    "example2": {
        "scenario_id": "example2",
        "source": _geo(10, 0.7, 20),
        "topology": {"kind": SINGLE, "cache_budgets": [15], "user_budgets": [10]},
        "policies": [OPTIMAL, "lambda-proportional", "lambda-inverse"],
        "sweeps": [
            {"q": [round(0.1 * k, 1) for k in range(1, 11)]},
            {"a": list(range(1, 21))},
        ],
    },
    "example3": {
        "scenario_id": "example3",
        "source": _geo(2, 0.5, 15),
        "topology": {"kind": SINGLE, "cache_budgets": [1], "user_budgets": [10]},
        "policies": [OPTIMAL],
        "sweeps": [{"q": [0.5, 0.75, 1.0], "C": [1 + 0.5 * k for k in range(19)]}],
    },
    "example4": {
        "scenario_id": "example4",
        "source": _geo(10, 0.7, 10),
        "topology": {"kind": CHAIN, "cache_budgets": [4, 10], "user_budgets": [20]},
        "policies": [OPTIMAL],
        "sweeps": [{"C1": [4, 8]}],
    },
    "example5": {
        "scenario_id": "example5",
        "source": _geo(10, 0.7, 10),
        "topology": {"kind": MULTIUSER, "cache_budgets": [10], "user_budgets": [5, 20]},
        "policies": [OPTIMAL],
    },
}


def preset(name: str) -> ScenarioConfig:
    try:
        return ScenarioConfig.from_dict(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
