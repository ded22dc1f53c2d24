"""Experiment configuration: dataclasses, YAML loading and canonical hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import yaml

from . import engine, instances
from .core import ContextualFunctionClass, Dirac, Smooth
from .environments import Bernoulli, Corruption, Environment, Shift, UniformAdditive, make_misspecified, realizable_environment
from .errors import ConfigurationError


@dataclass
class InstanceSpec:
    kind: str = "discrete"  # discrete | deceptive | smooth | single_action | explicit
    n_functions: int = 20
    n_contexts: int = 4
    n_actions: int = 5
    class_seed: Optional[int] = 0  # None: reuse each run's seed
    star_index: int = 0
    values: Optional[list] = None
    context_dist: Optional[list] = None


@dataclass
class EnvironmentSpec:
    noise: dict = field(default_factory=lambda: {"kind": "bernoulli"})
    adversary: Optional[dict] = None
    misspec_B: Optional[float] = None
    misspec_seed: int = 0


@dataclass
class BenchmarkSpec:
    kind: str = "dirac"  # dirac | smooth
    h: Optional[float] = None
    mu: Optional[list] = None


@dataclass
class AlgorithmSpec:
    name: str = "oe2d"
    schedule: dict = field(default_factory=lambda: {"mode": "doubling"})
    gamma: dict = field(default_factory=lambda: {"kind": "standard"})
    fixed_gamma: float = 100.0
    eps: Optional[float] = None
    solver: dict = field(default_factory=dict)
    warmup: int = 2


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    T: int = 1000
    seeds: list = field(default_factory=lambda: [0])
    instance: InstanceSpec = field(default_factory=InstanceSpec)
    environment: EnvironmentSpec = field(default_factory=EnvironmentSpec)
    benchmark: BenchmarkSpec = field(default_factory=BenchmarkSpec)
    algorithm: AlgorithmSpec = field(default_factory=AlgorithmSpec)
    output_dir: Optional[str] = None

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical(self) -> str:
        """Sorted-key JSON of everything that determines the artifacts."""
        d = self.to_dict()
        d.pop("output_dir", None)
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigurationError("config must be a mapping")
        problems: list[str] = []
        sub = {"instance": InstanceSpec, "environment": EnvironmentSpec, "benchmark": BenchmarkSpec, "algorithm": AlgorithmSpec}
        kwargs: dict[str, Any] = {}
        top = {f.name for f in fields(cls)}
        for key, val in raw.items():
            if key not in top:
                problems.append(f"unknown key {key!r}")
            elif key in sub:
                if val is None:
                    continue
                if not isinstance(val, dict):
                    problems.append(f"{key}: expected a mapping")
                    continue
                allowed = {f.name for f in fields(sub[key])}
                bad = sorted(set(val) - allowed)
                if bad:
                    problems.append(f"{key}: unknown keys {bad}")
                    continue
                kwargs[key] = sub[key](**val)
            else:
                kwargs[key] = val
        if problems:
            raise ConfigurationError("invalid config:\n  " + "\n  ".join(problems))
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        try:
            raw = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as e:
            raise ConfigurationError(f"config is not valid YAML: {e}") from None
        except OSError as e:
            raise ConfigurationError(f"cannot read config: {e}") from None
        return cls.from_dict(raw or {})

    def dump(self, path: Union[str, Path]) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))

    # -- validation and construction ----------------------------------------

    def validate(self) -> None:
        problems = []
        if not isinstance(self.T, int) or self.T < 1:
            problems.append("T must be a positive integer")
        if not isinstance(self.seeds, list) or not self.seeds or not all(isinstance(s, int) for s in self.seeds):
            problems.append("seeds must be a nonempty list of integers")
        if self.instance.kind not in ("discrete", "deceptive", "smooth", "single_action", "explicit"):
            problems.append(f"instance.kind {self.instance.kind!r} is not recognised")
        if self.instance.kind == "explicit" and self.instance.values is None:
            problems.append("explicit instances need instance.values")
        if self.benchmark.kind not in ("dirac", "smooth"):
            problems.append(f"benchmark.kind {self.benchmark.kind!r} is not recognised")
        if self.benchmark.kind == "smooth" and self.benchmark.h is None:
            problems.append("smooth benchmarks need benchmark.h")
        if self.algorithm.name not in engine.ALGORITHMS:
            problems.append(f"algorithm.name must be one of {sorted(engine.ALGORITHMS)}")
        if problems:
            raise ConfigurationError("invalid config:\n  " + "\n  ".join(problems))
        # building the pieces surfaces the remaining domain errors
        self.build_schedule()
        self.build(self.seeds[0])

    def build_benchmark(self, n_actions: int):
        b = self.benchmark
        if b.kind == "dirac":
            return Dirac()
        mu = np.full(n_actions, 1.0 / n_actions) if b.mu is None else np.asarray(b.mu, dtype=float)
        return Smooth(float(b.h), mu)

    def build_schedule(self) -> engine.EpochSchedule:
        a = self.algorithm
        sched = dict(a.schedule)
        try:
            gm = engine.GammaMode(**a.gamma)
            return engine.EpochSchedule(
                mode=sched.get("mode", "doubling"),
                gamma_mode=gm,
                taus=tuple(sched.get("taus", ())),
                eps=a.eps,
                delta=sched.get("delta", 0.05),
            )
        except TypeError as e:
            raise ConfigurationError(f"bad schedule: {e}") from None

    def build_solver(self) -> engine.SolverDefaults:
        try:
            return engine.SolverDefaults(**self.algorithm.solver)
        except TypeError as e:
            raise ConfigurationError(f"bad solver settings: {e}") from None

    def _noise(self):
        n = self.environment.noise or {"kind": "bernoulli"}
        if n.get("kind") == "bernoulli":
            return Bernoulli()
        if n.get("kind") == "uniform_additive":
            return UniformAdditive(float(n.get("width", 0.2)))
        raise ConfigurationError(f"unknown noise {n!r}")

    def _adversary(self):
        a = self.environment.adversary
        if not a:
            return None
        kind = a.get("kind")
        if kind == "corruption":
            return Corruption(int(a.get("budget", 0)), a.get("strategy", "flip"))
        if kind == "shift":
            return Shift(float(a.get("ratio", 1.0)), a.get("schedule", "alternate"))
        raise ConfigurationError(f"unknown adversary {a!r}")

    def build(self, seed: int) -> tuple[ContextualFunctionClass, Environment]:
        """The function class and environment for one run seed."""
        i = self.instance
        cseed = seed if i.class_seed is None else i.class_seed
        if i.kind == "discrete" or i.kind == "smooth":
            F = instances.random_class(i.n_functions, i.n_contexts, i.n_actions, cseed, star_index=i.star_index)
        elif i.kind == "deceptive":
            F, _ = instances.deceptive_instance()
        elif i.kind == "single_action":
            F, _ = instances.single_action_instance(i.n_contexts)
        else:
            F = ContextualFunctionClass(np.asarray(i.values, dtype=float), star_index=i.star_index)
        bench = self.build_benchmark(F.n_actions)
        ctx = None if i.context_dist is None else np.asarray(i.context_dist, dtype=float)
        if self.environment.misspec_B is not None:
            env = make_misspecified(
                F, float(self.environment.misspec_B), seed=self.environment.misspec_seed, context_dist=ctx,
                benchmark=bench, noise=self._noise(), adversary=self._adversary(),
            )
        else:
            env = realizable_environment(F, context_dist=ctx, benchmark=bench, noise=self._noise(), adversary=self._adversary())
        return F, env

    def run_seed(self, seed: int) -> engine.RunLedger:
        F, env = self.build(seed)
        a = self.algorithm
        if a.name == "oe2d":
            return engine.oe2d_run(env, F, schedule=self.build_schedule(), solver=self.build_solver(), T=self.T, seed=seed)
        if a.name == "squarecbf":
            return engine.squarecbf_run(env, F, gamma=a.fixed_gamma, eps=a.eps, T=self.T, seed=seed, solver=self.build_solver())
        if a.name == "igw":
            return engine.igw_baseline_run(env, F, T=self.T, schedule=self.build_schedule(), seed=seed)
        if a.name == "greedy":
            return engine.greedy_run(env, F, T=self.T, seed=seed, warmup=a.warmup)
        return engine.uniform_run(env, F, T=self.T, seed=seed)


def run_seed_job(cfg_dict: dict, seed: int) -> engine.RunLedger:
    """Top-level helper so process pools can pickle the job."""
    return ExperimentConfig.from_dict(cfg_dict).run_seed(seed)
