"""Synthetic completion experiments and their on-disk artifacts.

Randomness comes from a single integer seed, split with
:class:`numpy.random.SeedSequence` into independent streams::

    spawn index 0 -> target cores
    spawn index 1 -> sampling sets (training and test)
    spawn index 2 -> noise
    spawn index 3 -> starting point
    spawn index 4 -> solver (perturbations)

so that, e.g., changing the noise level leaves the target and the sampling
set untouched.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .completion import CompletionProblem, SolverConfig, solve, test_rmse
from .rank import EstimatorConfig, estimate_tt_rank, naive_estimate
from .tensor import SampleSet
from .tt import TTTensor, evaluate_samples, random_tt, write_tt

STREAMS = ("cores", "omega", "noise", "x0", "solver")


def streams(seed) -> dict:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


@dataclass
class ExperimentConfig:
    dims: tuple = (100, 100, 100)
    solve_rank: tuple = (2, 2)
    true_rank: tuple = (6, 6)
    num_samples: int = 40_000
    num_test: int = 10_000
    noise: float = 0.0
    noise_mode: str = "sampled"
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        self.solve_rank = tuple(int(r) for r in self.solve_rank)
        self.true_rank = tuple(int(r) for r in self.true_rank)
        if isinstance(self.solver, dict):
            self.solver = SolverConfig(**self.solver)
        if isinstance(self.estimator, dict):
            self.estimator = EstimatorConfig(**self.estimator)
        total = int(np.prod(self.dims))
        if self.num_samples < 0 or self.num_test < 0:
            raise ValueError("sample counts must be nonnegative")
        if self.num_samples + self.num_test > total:
            raise ValueError(
                f"{self.num_samples} + {self.num_test} samples exceed the {total} entries"
            )
        if self.noise < 0:
            raise ValueError("noise level must be nonnegative")
        if self.noise_mode not in ("sampled", "dense"):
            raise ValueError("noise_mode must be 'sampled' or 'dense'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["solve_rank"] = list(self.solve_rank)
        d["true_rank"] = list(self.true_rank)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)


PRESETS = {
    "fig1": dict(solver=dict(max_iters=1000, grad_tol_sq=1e-8)),
    "fig2": dict(solver=dict(max_iters=10, grad_tol_sq=0.0)),
    # the sampling regime of the noisy reference run
    "fig3": dict(noise=10.0, num_samples=80_000, solver=dict(max_iters=120, grad_tol_sq=0.0)),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    """Configuration of one of the reference experiments (``fig1``..``fig3``)."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    base = PRESETS[name]
    solver = SolverConfig(**{**base.get("solver", {}), **overrides.pop("solver", {})})
    kw = {k: v for k, v in base.items() if k != "solver"}
    kw.update(overrides)
    return ExperimentConfig(solver=solver, **kw)


def sample_indices(dims, m: int, rng) -> np.ndarray:
    """``m`` distinct index triples drawn uniformly without replacement."""
    total = int(np.prod(dims))
    lin = rng.choice(total, size=m, replace=False)
    return np.stack(np.unravel_index(lin, tuple(dims), order="F"), axis=1)


def generate(cfg: ExperimentConfig):
    """Draw the target, the training set and the disjoint test set.

    Noise of standard deviation ``cfg.noise`` is added to the observed
    values of both sets. In ``sampled`` mode one normal draw per observed
    entry is made; ``dense`` mode draws the full noise tensor first (for
    cross-checking, equal in distribution on the samples).
    """
    rngs = streams(cfg.seed)
    A = random_tt(cfg.dims, cfg.true_rank, rngs["cores"])
    idx = sample_indices(cfg.dims, cfg.num_samples + cfg.num_test, rngs["omega"])
    values = _values_at(A, idx)
    if cfg.noise > 0:
        if cfg.noise_mode == "dense":
            E = rngs["noise"].standard_normal(cfg.dims)
            values = values + cfg.noise * E[idx[:, 0], idx[:, 1], idx[:, 2]]
        else:
            values = values + cfg.noise * rngs["noise"].standard_normal(len(values))
    m = cfg.num_samples
    train = SampleSet(cfg.dims, idx[:m], values[:m])
    test = SampleSet(cfg.dims, idx[m:], values[m:])
    return A, train, test


def _values_at(A: TTTensor, idx: np.ndarray) -> np.ndarray:
    from .tt import _sample_values

    return _sample_values(A.X1, A.X2, A.X3, idx)


@dataclass
class RunResult:
    target: TTTensor
    solution: object
    trace: object
    estimate: object
    naive: int
    test_rmse: float


def run(cfg: ExperimentConfig, out_dir=None) -> RunResult:
    """Generate data, solve at ``cfg.solve_rank`` and estimate the rank.

    When ``out_dir`` is given, writes ``trace.csv``, ``singular_values.csv``,
    ``estimate.json`` and ``config.echo.json`` there.
    """
    rngs = streams(cfg.seed)
    A, train, test = generate(cfg)
    p = CompletionProblem(cfg.dims, cfg.solve_rank, train=train, test=test if len(test) else None)
    X0 = random_tt(cfg.dims, cfg.solve_rank, rngs["x0"])
    solver_cfg = replace(cfg.solver, seed=int(rngs["solver"].integers(2**32)))
    X, trace = solve(p, solver_cfg, X0)
    est = estimate_tt_rank(X, p, cfg.estimator)
    naive = naive_estimate(train.with_values(
        evaluate_samples(X, train).values - train.values), cfg.dims, cfg.estimator)
    rmse = test_rmse(X, test) if len(test) else float("nan")
    result = RunResult(A, X, trace, est, naive, rmse)
    if out_dir is not None:
        write_artifacts(result, cfg, out_dir)
    return result


def write_artifacts(result: RunResult, cfg: ExperimentConfig, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.trace.to_csv(out / "trace.csv")
    result.estimate.write_singular_values_csv(out / "singular_values.csv")
    est = json.loads(result.estimate.to_json())
    est["naive_delta"] = result.naive
    est["iterations"] = result.trace.n_iter
    est["test_rmse"] = result.test_rmse
    (out / "estimate.json").write_text(json.dumps(est, indent=2) + "\n")
    (out / "config.echo.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    write_tt(result.solution, out / "solution.tt3")
