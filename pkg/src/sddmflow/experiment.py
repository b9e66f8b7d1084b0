"""Experiment matrices: one problem instance, several methods, CSV traces.

Every method in a run sees the identical problem (same seed); the summary
JSON records iterations-to-threshold, final objective and feasibility, and
the communication totals per method.
"""

import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ParameterError
from .fileio import write_trace_csv
from .graphs import generate_random_network
from .netflow import CostFunction, FlowProblem
from .optimize import ALPHA_RULES, METHODS, OptimizerConfig, run_optimizer

FEASIBILITY_TARGET = 1e-3


@dataclass
class ExperimentConfig:
    n: int = 30
    m: int = 70
    seed: int = 7
    cost_kind: str = "quadratic"
    gamma: float = 1.0
    Gamma: float = 10.0
    smooth_s: float = 0.5
    weight_min: float = 1.0
    weight_max: float = 2.0
    supply_scale: float = 1.0
    eps: float = 1e-4
    rhop: int = 1
    d_override: int = None
    methods: list = field(default_factory=lambda: list(METHODS))
    alpha_rule: str = "backtracking"
    gradient_threshold: float = 1e-10
    max_iter_newton: int = None
    max_iter_gradient: int = None
    neumann_terms: int = 2
    engine: str = "dist"
    out_dir: str = "results"

    def validate(self):
        if self.n < 2 or self.m < self.n - 1 or self.m > self.n * (self.n - 1) // 2:
            raise ParameterError(f"infeasible (n={self.n}, m={self.m})")
        if self.rhop < 1 or (self.rhop & (self.rhop - 1)) != 0:
            raise ParameterError("rhop must be a power of two")
        if not (0 < self.eps <= 0.5):
            raise ParameterError("eps must lie in (0, 1/2]")
        if self.cost_kind not in ("quadratic", "smoothed"):
            raise ParameterError(f"unknown cost kind {self.cost_kind!r}")
        if self.alpha_rule not in ALPHA_RULES:
            raise ParameterError(f"unknown alpha rule {self.alpha_rule!r}")
        if not (0 < self.gamma <= self.Gamma):
            raise ParameterError("need 0 < gamma <= Gamma")
        for mth in self.methods:
            if mth not in METHODS:
                raise ParameterError(f"unknown method {mth!r}")
        return self

    @staticmethod
    def from_toml(path):
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        cfg = ExperimentConfig()
        sections = {"problem", "solver", "run"}
        for section, items in raw.items():
            if section not in sections:
                raise ParameterError(f"unknown config section [{section}]")
            for key, val in items.items():
                if not hasattr(cfg, key):
                    raise ParameterError(f"unknown config key {key!r}")
                setattr(cfg, key, val)
        return cfg.validate()


def build_problem(cfg):
    """Instance shared by all methods of one experiment."""
    inst = generate_random_network(cfg.n, cfg.m, cfg.seed,
                                   (cfg.weight_min, cfg.weight_max),
                                   cfg.supply_scale)
    rng = np.random.default_rng((cfg.seed, 1000))
    E = inst.network.num_arcs
    if cfg.cost_kind == "quadratic":
        cost = CostFunction.quadratic(rng.uniform(cfg.gamma, cfg.Gamma, E))
    else:
        a_hi = max(cfg.gamma, cfg.Gamma - cfg.smooth_s)
        cost = CostFunction.smoothed(rng.uniform(cfg.gamma, a_hi, E),
                                     np.full(E, cfg.smooth_s))
    return inst, FlowProblem.create(inst.network, cost, inst.b)


def _optimizer_config(cfg, method):
    if method == "gradient":
        return OptimizerConfig(
            method=method, eps=cfg.eps, R=cfg.rhop, alpha_rule="fixed",
            gradient_threshold=cfg.gradient_threshold,
            max_iter=cfg.max_iter_gradient)
    return OptimizerConfig(
        method=method, eps=cfg.eps, R=cfg.rhop, alpha_rule=cfg.alpha_rule,
        gradient_threshold=cfg.gradient_threshold,
        max_iter=cfg.max_iter_newton, neumann_terms=cfg.neumann_terms,
        d_override=cfg.d_override, engine=cfg.engine)


def run_experiment(cfg, out_dir=None, echo=print):
    """Run every configured method on the shared instance.

    Writes <method>.csv per method plus summary.json; returns the summary
    dict. Any module error aborts with the offending method named.
    """
    cfg.validate()
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    inst, problem = build_problem(cfg)
    summary = {
        "config": {k: v for k, v in asdict(cfg).items()},
        "feasibility_target": FEASIBILITY_TARGET,
        "methods": {},
    }
    for method in cfg.methods:
        t0 = time.perf_counter()
        try:
            trace = run_optimizer(problem, _optimizer_config(cfg, method),
                                  header_extra={"seed": cfg.seed})
        except Exception as exc:
            raise type(exc)(f"[method={method}] {exc}") from exc
        wall = (time.perf_counter() - t0) * 1e3
        messages = int(trace.column("messages").sum())
        rounds = int(trace.column("rounds").sum())
        cost_summary = {"total_messages": messages, "total_rounds": rounds}
        path = os.path.join(out_dir, f"{method}.csv")
        write_trace_csv(trace, path, cost_summary)
        last = trace.rows[-1]
        summary["methods"][method] = {
            "iterations": last.k,
            "iterations_to_feasibility": trace.iterations_to(
                "feas", FEASIBILITY_TARGET),
            "final_f": last.f,
            "final_feasibility": last.feas,
            "final_gradient_norm_L": last.gnorm_L,
            "total_messages": messages,
            "total_rounds": rounds,
            "wall_ms": wall,
            "csv": os.path.basename(path),
        }
        if echo:
            echo(f"{method}: {last.k} iterations, feasibility "
                 f"{last.feas:.3e}, {messages} messages")
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    return summary
