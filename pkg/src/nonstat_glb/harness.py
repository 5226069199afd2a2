"""Experiment configuration, seeded runs, CSV persistence and summaries."""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .bob import run_bob
from .envs import DriftSchedule, Environment, variation_budget
from .policies import GAMMA_CEIL, BvdGlmUcb, make_policy, tune_gamma
from .problem import ProblemConfig
from .records import RoundRecord, config_hash, records_to_csv

SCHEMA_VERSION = 1
THREADS_ENV = "NONSTAT_GLB_THREADS"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EnvSection(_Section):
    kind: Literal["rotating", "piecewise_constant", "stationary"] = "rotating"
    T: int = Field(3000, ge=1)
    d: int = Field(2, ge=1)
    K: int = Field(10, ge=1)
    arm_mode: Literal["random_sphere", "orthogonal"] = "random_sphere"
    seed_offset: int = 0
    link: Literal["logistic", "identity"] = "logistic"
    L: float = Field(1.0, gt=0)
    radius: float = Field(1.0, gt=0)
    switches: Optional[list[int]] = None
    thetas: Optional[list[list[float]]] = None

    def schedule(self) -> DriftSchedule:
        if self.kind == "rotating":
            return DriftSchedule("rotating", self.T, self.d, radius=self.radius)
        thetas = tuple(tuple(th) for th in (self.thetas or ()))
        if self.kind == "stationary":
            return DriftSchedule("stationary", self.T, self.d, thetas=thetas)
        return DriftSchedule("piecewise_constant", self.T, self.d, switches=tuple(self.switches or ()), thetas=thetas)

    @model_validator(mode="after")
    def _check_schedule(self):
        self.schedule()  # raises ValueError on an inconsistent schedule
        return self


class PolicySection(_Section):
    kind: Literal["bvd_glm_ucb", "glm_ucb", "oful", "d_linucb"]
    name: Optional[str] = None
    gamma: Union[float, Literal["auto"]] = "auto"
    gamma_mode: Literal["orthogonal", "general"] = "orthogonal"
    budget: Union[float, Literal["auto"]] = "auto"
    lam: float = Field(1.0, gt=0, alias="lambda")
    delta: float = Field(0.1, gt=0, le=1)
    S: float = Field(1.0, gt=0)
    sigma: float = Field(0.5, gt=0)
    weight_floor: Optional[float] = Field(None, gt=0)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @field_validator("gamma")
    @classmethod
    def _gamma_open(cls, v):
        if v != "auto" and not 0 < v < 1:
            raise ValueError("gamma must lie in (0, 1)")
        return v

    @field_validator("budget")
    @classmethod
    def _budget_pos(cls, v):
        if v != "auto" and not v > 0:
            raise ValueError("budget must be > 0")
        return v

    @property
    def label(self) -> str:
        return self.name or self.kind


class ProjectionSection(_Section):
    tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(500, ge=1)


class BobSection(_Section):
    H: Union[int, Literal["auto"]] = "auto"
    grid_override: Optional[list[float]] = None

    @field_validator("grid_override")
    @classmethod
    def _grid_open(cls, v):
        if v is not None and (not v or any(not 0 < g < 1 for g in v)):
            raise ValueError("grid_override must be a non-empty list of values in (0, 1)")
        return v


class ExperimentConfig(_Section):
    schema_version: Literal[1]
    env: EnvSection = EnvSection()
    policy: Union[PolicySection, list[PolicySection]]
    projection: ProjectionSection = ProjectionSection()
    bob: BobSection = BobSection()
    seeds: list[int] = Field(default_factory=lambda: [0])
    output: str = "out"

    @model_validator(mode="after")
    def _unique_labels(self):
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ValueError(f"policy labels must be unique, got {labels}")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        return self

    @property
    def policies(self) -> list[PolicySection]:
        return self.policy if isinstance(self.policy, list) else [self.policy]

    def hash(self) -> str:
        return config_hash(self.model_dump(mode="json", by_alias=True))

    def with_overrides(self, *, seeds: int | None = None, horizon: int | None = None,
                       out: str | None = None) -> "ExperimentConfig":
        data = self.model_dump(mode="json", by_alias=True)
        if seeds is not None:
            data["seeds"] = list(range(seeds))
        if horizon is not None:
            data["env"]["T"] = horizon
        if out is not None:
            data["output"] = out
        return ExperimentConfig.model_validate(data)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.model_validate(json.load(fh))


def resolve_gamma(pol: PolicySection, env: EnvSection) -> float:
    if pol.kind in ("glm_ucb", "oful"):
        return 1.0
    if pol.gamma != "auto":
        return float(pol.gamma)
    B = variation_budget(env.schedule()) if pol.budget == "auto" else float(pol.budget)
    if B <= 0:  # no drift: longest memory allowed
        return GAMMA_CEIL
    return tune_gamma(B, env.d, env.T, pol.gamma_mode)


def problem_config(pol: PolicySection, env: EnvSection) -> ProblemConfig:
    return ProblemConfig(d=env.d, S=pol.S, L=env.L, sigma=pol.sigma, lam=pol.lam,
                         gamma=resolve_gamma(pol, env), delta=pol.delta, T=env.T)


@dataclass
class ProjectionAudit:
    """Counts over every projection call of a run (fast path included)."""

    calls: int = 0
    solved: int = 0
    infeasible: int = 0
    certificate_failures: int = 0
    unconverged: int = 0

    def add(self, pol: BvdGlmUcb):
        out = pol.last_projection
        self.calls += 1
        if out.fast_path:
            return
        self.solved += 1
        S = pol.cfg.S
        if np.linalg.norm(out.theta_tilde) > S * (1 + 1e-12) or np.linalg.norm(out.eta) > 1 + 1e-12:
            self.infeasible += 1
        if out.certificate_gap(pol.state, pol.link, pol.c_mu) > 1 + 1e-6:
            self.certificate_failures += 1
        self.unconverged += not out.converged


def run_policy(config: ExperimentConfig, pol: PolicySection, seed: int) -> tuple[list[RoundRecord], dict]:
    """One deterministic run of one policy on one seed."""
    env_cfg = config.env
    env = Environment(env_cfg.schedule(), seed=seed + env_cfg.seed_offset, K=env_cfg.K,
                      arm_mode=env_cfg.arm_mode, L=env_cfg.L, link_kind=env_cfg.link)
    cfg = problem_config(pol, env_cfg)
    kw = {}
    if pol.kind in ("bvd_glm_ucb", "glm_ucb"):
        kw = dict(projection_tol=config.projection.tol, projection_max_iter=config.projection.max_iter)
        if pol.weight_floor is not None:
            kw["weight_floor"] = pol.weight_floor
    policy = make_policy(pol.kind, cfg, env_cfg.link, **kw)
    audit = ProjectionAudit()
    track = type(policy) is BvdGlmUcb
    records = []
    cum = 0.0
    for t in range(1, env_cfg.T + 1):
        arms = env.draw_arms()
        th_norm = float(np.linalg.norm(policy.theta_hat))
        i = policy.choose(arms)
        r = env.sample_reward(arms[i])
        reg = env.instantaneous_regret(arms, i)
        cum += reg
        records.append(RoundRecord(seed, t, pol.label, i, r, reg, cum, th_norm, int(th_norm > cfg.S)))
        policy.observe(arms[i], r)
        if track:
            audit.add(policy)
        env.advance()
    extra = {"gamma": cfg.gamma, "projection_audit": vars(audit) if track else None,
             "unconverged_fits": getattr(policy, "unconverged_fits", 0)}
    return records, extra


def _job(args):
    config, p_idx, seed = args
    return run_policy(config, config.policies[p_idx], seed)


def worker_count(n_jobs: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n, n_jobs))


def _map_jobs(fn, jobs):
    """Results in job order, whatever the completion order."""
    n = worker_count(len(jobs))
    if n == 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, jobs))


def checkpoints(T: int) -> list[int]:
    return [max(1, (k * T) // 4) for k in (1, 2, 3, 4)]


def _stats(values) -> dict:
    a = np.asarray(values, dtype=float)
    return {"mean": float(a.mean()), "std": float(a.std())}


def run_experiment(config: ExperimentConfig, out_dir=None, *, write: bool = True) -> dict:
    """Run every (policy, seed) pair; write one CSV per policy plus summary.json.

    Standard deviations are population (ddof = 0) over seeds.
    """
    jobs = [(config, p, s) for p in range(len(config.policies)) for s in config.seeds]
    results = _map_jobs(_job, jobs)
    T = config.env.T
    cps = checkpoints(T)
    summary = {"schema_version": SCHEMA_VERSION, "config_hash": config.hash(), "T": T, "checkpoints": cps,
               "seeds": list(config.seeds), "policies": {}}
    per_policy: dict[str, list] = {}
    for (_, p, seed), (recs, extra) in zip(jobs, results):
        label = config.policies[p].label
        per_policy.setdefault(label, []).append((seed, recs, extra))

    out = Path(out_dir if out_dir is not None else config.output)
    if write:
        out.mkdir(parents=True, exist_ok=True)
    for label, runs in per_policy.items():
        final = {str(c): _stats([recs[c - 1].cum_regret for _, recs, _ in runs]) for c in cps}
        entry = {
            "gamma": runs[0][2]["gamma"],
            "cum_regret": final,
            "outside_theta_rate": _stats([np.mean([r.outside_theta for r in recs]) for _, recs, _ in runs]),
            "unconverged_fits": int(sum(e["unconverged_fits"] for _, _, e in runs)),
        }
        audits = [e["projection_audit"] for _, _, e in runs if e["projection_audit"] is not None]
        if audits:
            entry["projection_audit"] = {k: int(sum(a[k] for a in audits)) for k in audits[0]}
        summary["policies"][label] = entry
        if write:
            (out / f"{label}.csv").write_text(records_to_csv(r for _, recs, _ in runs for r in recs))
    if write:
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    summary["records"] = {label: [r for _, recs, _ in runs for r in recs] for label, runs in per_policy.items()}
    return summary


def _bob_job(args):
    config, seed = args
    env_cfg = config.env
    pol = next((p for p in config.policies if p.kind == "bvd_glm_ucb"), None)
    if pol is None:
        pol = PolicySection(kind="bvd_glm_ucb")
    cfg = problem_config(pol, env_cfg)
    env = Environment(env_cfg.schedule(), seed=seed + env_cfg.seed_offset, K=env_cfg.K,
                      arm_mode=env_cfg.arm_mode, L=env_cfg.L, link_kind=env_cfg.link)
    H = None if config.bob.H == "auto" else config.bob.H
    return run_bob(cfg, env, seed, H=H, grid=config.bob.grid_override, link=env_cfg.link,
                   projection_tol=config.projection.tol, projection_max_iter=config.projection.max_iter)


def run_bob_sweep(config: ExperimentConfig, out_dir=None, *, write: bool = True) -> dict:
    """BOB-BVD-GLM-UCB on every seed; hyperparameters other than gamma come from the first bvd policy entry."""
    runs = _map_jobs(_bob_job, [(config, s) for s in config.seeds])
    T = config.env.T
    cps = checkpoints(T)
    summary = {
        "schema_version": SCHEMA_VERSION, "config_hash": config.hash(), "T": T, "checkpoints": cps,
        "seeds": list(config.seeds), "grid": runs[0].grid, "H": runs[0].H, "alpha": runs[0].alpha,
        "cum_regret": {str(c): _stats([run.records[c - 1].cum_regret for run in runs]) for c in cps},
        "blocks": {
            str(seed): [{"chosen": b.chosen, "gamma": b.gamma, "reward_sum": b.reward_sum,
                         "probabilities": b.probabilities.tolist()} for b in run.blocks]
            for seed, run in zip(config.seeds, runs)
        },
    }
    if write:
        out = Path(out_dir if out_dir is not None else config.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bob.csv").write_text(records_to_csv(r for run in runs for r in run.records))
        (out / "bob_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    summary["runs"] = runs
    return summary


def budget_report(kind: str, T: int, d: int, budget: float | None = None) -> dict:
    if kind != "rotating":
        raise ValueError("only the rotating schedule has a built-in budget")
    B = variation_budget(DriftSchedule("rotating", T, d)) if budget is None else budget
    return {"B_T": B, "gamma_orthogonal": tune_gamma(B, d, T, "orthogonal"),
            "gamma_general": tune_gamma(B, d, T, "general"), "T": T, "d": d}
