"""Finite-horizon estimators of the long-run behaviour of simulated paths.

Almost-sure limits cannot be observed on a finite horizon. Time averages are
taken over the whole horizon, growth rates are fitted on the trailing half,
and everything is reported with its across-path spread.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .engine import (
    NegativityError,
    SimConfig,
    Trajectory,
    path_noise,
    replay_increments,
    simulate,
    simulate_aux,
)
from .model import JumpMeasure, ModelParams, NoiseParams
from .thresholds import extinction_weights

__all__ = [
    "time_average",
    "extinction_rate",
    "PersistenceReport",
    "persistence_check",
    "SLLN_TERMS",
    "slln_diagnostics",
    "PathMetrics",
    "EnsembleSummary",
    "ensemble_run",
    "default_workers",
]

_COMPONENTS = {"S": 0, "I": 1, "S_m": 2, "I_m": 3}


def _select(traj, component) -> np.ndarray:
    states = np.asarray(traj.states)
    if component is None:
        if states.shape[1] != 1:
            raise ValueError("component must be given for multi-compartment trajectories")
        return states[:, 0]
    if component == "infected":
        return states[:, 1] + states[:, 3]
    if isinstance(component, str):
        return states[:, _COMPONENTS[component]]
    return states[:, int(component)]


def time_average(traj, component=None, power: int = 1) -> float:
    """Trapezoidal estimate of ``(1/T) * integral of x(s)**power`` over ``[0, T]``.

    ``component`` is a compartment name, an index, ``"infected"`` for
    ``I + I_m``, or ``None`` for a scalar (auxiliary) trajectory.
    """
    times = np.asarray(traj.times, dtype=float)
    if times.size < 2 or times[-1] <= times[0]:
        raise ValueError("time_average needs a trajectory covering a positive horizon")
    x = _select(traj, component) ** power
    return float(np.trapezoid(x, times) / (times[-1] - times[0]))


def _log_weighted(traj, params: ModelParams, window: float):
    lam1, lam2 = extinction_weights(params)
    times = np.asarray(traj.times)
    start = times[-1] - window * (times[-1] - times[0])
    mask = times >= start
    weighted = lam1 * traj.states[mask, 1] + lam2 * traj.states[mask, 3]
    return times[mask], weighted


def extinction_rate(traj, params: ModelParams, noise: NoiseParams | None = None,
                    jumps: JumpMeasure | None = None, window: float = 0.5) -> float:
    """Least-squares slope of ``log(lambda1 I + lambda2 I_m)`` over the trailing window.

    Points where the weighted sum is not positive (clamped to zero) are
    dropped; a ``ValueError`` is raised when fewer than two remain.
    """
    if not 0 < window <= 1:
        raise ValueError("window must lie in (0, 1]")
    t, w = _log_weighted(traj, params, window)
    keep = w > 0
    if keep.sum() < 2:
        raise ValueError("no positive infection left in the fitting window")
    slope, _ = np.polyfit(t[keep], np.log(w[keep]), 1)
    return float(slope)


def _hits_floor(traj, params: ModelParams, window: float) -> bool:
    _, w = _log_weighted(traj, params, window)
    return bool(np.any(w <= 0))


@dataclass
class PersistenceReport:
    n_paths: int
    bound: float
    fraction_positive: float
    fraction_above_bound: float
    mean_time_average: float
    min_time_average: float


def persistence_check(ensemble, bound: float) -> PersistenceReport:
    """Fraction of paths whose time-averaged infection is positive / above ``bound``.

    ``ensemble`` is an ``EnsembleSummary`` or a sequence of per-path time
    averages of ``I + I_m``.
    """
    if isinstance(ensemble, EnsembleSummary):
        values = np.array([m.time_avg_infection for m in ensemble.paths if not m.failed])
    else:
        values = np.asarray(ensemble, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("no path time averages to check")
    return PersistenceReport(
        n_paths=int(values.size),
        bound=float(bound),
        fraction_positive=float(np.mean(values > 0)),
        fraction_above_bound=float(np.mean(values > bound)),
        mean_time_average=math.fsum(values) / values.size,
        min_time_average=float(values.min()),
    )


SLLN_TERMS = ("B1:S", "B2:I", "B3:S_m", "B4:I_m", "N:S", "N:I", "N:S_m", "N:I_m")


def _block_sums(dW: np.ndarray, stride: int) -> np.ndarray:
    if stride == 1:
        return dW
    edges = np.arange(0, dW.shape[0], stride)
    return np.add.reduceat(dW, edges, axis=0)


def slln_diagnostics(traj: Trajectory, noise: NoiseParams, jumps: JumpMeasure,
                     checkpoints=None, increments: np.ndarray | None = None) -> dict:
    """``|M(t)/t|`` for every martingale term of the model equations.

    Monitored terms are ``sigma_i * int x_i dB_i`` (keys ``B1:S`` ...) and the
    compensated jump integrals ``int int xi_i x_i(s-) N~(ds, du)`` (keys
    ``N:S`` ...). Brownian integrals are left-point sums on the recorded grid
    using the replayed increments. Returns ``{"t": checkpoints, term: values}``.
    """
    times = np.asarray(traj.times)
    T = times[-1]
    if checkpoints is None:
        checkpoints = T / np.array([16.0, 8.0, 4.0, 2.0, 1.0])
    checkpoints = np.asarray(checkpoints, dtype=float)
    idx = np.clip(np.searchsorted(times, checkpoints - 1e-12 * T), 1, times.size - 1)
    t_at = times[idx]

    X = traj.states
    sigma = noise.as_array()
    out = {"t": t_at}
    if np.any(sigma > 0):
        dW = increments if increments is not None else replay_increments(traj)
        stride = traj.config.record_stride if traj.config is not None else 1
        dW = _block_sums(np.asarray(dW), stride)
        ito = np.vstack([np.zeros((1, 4)), np.cumsum(X[:-1] * dW * sigma, axis=0)])
    else:
        ito = np.zeros_like(X)
    for k in range(4):
        out[SLLN_TERMS[k]] = np.abs(ito[idx, k] / t_at)

    comp = jumps.compensator()
    jump_cum = np.zeros((times.size, 4))
    if traj.jump_times.size:
        xi = jumps.xi_matrix[traj.jump_atoms]
        contrib = traj.jump_pre_states * xi
        pos = np.searchsorted(times, traj.jump_times, side="left")
        np.add.at(jump_cum, np.minimum(pos, times.size - 1), contrib)
        jump_cum = np.cumsum(jump_cum, axis=0)
    dt = np.diff(times)[:, None]
    comp_cum = np.vstack([np.zeros((1, 4)),
                          np.cumsum(0.5 * (X[1:] + X[:-1]) * dt, axis=0)]) * comp
    mart = jump_cum - comp_cum
    for k in range(4):
        out[SLLN_TERMS[4 + k]] = np.abs(mart[idx, k] / t_at)
    return out


@dataclass
class PathMetrics:
    path: int
    terminal_I: float = float("nan")
    terminal_Im: float = float("nan")
    time_avg_infection: float = float("nan")
    lyapunov_rate: float = float("nan")
    clamped: int = 0
    extinct_by_floor: bool = False
    n_jumps: int = 0
    aux: dict = field(default_factory=dict)
    slln: dict = field(default_factory=dict)
    failed: bool = False
    error: str = ""


def _quantiles(values: np.ndarray) -> dict:
    if values.size == 0:
        return {k: float("nan") for k in ("mean", "std", "median", "q05", "q25", "q75", "q95", "min", "max")}
    q = np.quantile(values, [0.05, 0.25, 0.5, 0.75, 0.95])
    return {
        "mean": math.fsum(values) / values.size,
        "std": float(np.std(values, ddof=1)) if values.size > 1 else 0.0,
        "median": float(q[2]),
        "q05": float(q[0]),
        "q25": float(q[1]),
        "q75": float(q[3]),
        "q95": float(q[4]),
        "min": float(values.min()),
        "max": float(values.max()),
    }


def _mean_se(values: np.ndarray) -> dict:
    n = values.size
    if n == 0:
        return {"mean": float("nan"), "stderr": float("nan"), "ci95": [float("nan")] * 2, "n": 0}
    mean = math.fsum(values) / n
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return {"mean": mean, "stderr": se, "ci95": [mean - 1.96 * se, mean + 1.96 * se], "n": n}


@dataclass
class EnsembleSummary:
    n_paths: int
    n_failed: int
    terminal_infection: dict
    mean_time_avg_infection: dict
    lyapunov_rate: dict
    n_extinct_by_floor: int
    aux_avgs: dict
    slln_residuals: dict
    clamp_rate: float
    paths: list = field(default_factory=list, repr=False)
    metadata: dict = field(default_factory=dict)

    def to_dict(self, include_paths: bool = False) -> dict:
        out = asdict(self)
        if not include_paths:
            out.pop("paths")
        return out

    def write_paths_csv(self, path):
        with open(path, "w") as fh:
            fh.write("path,terminal_I,terminal_Im,time_avg_infection,lyapunov_rate,clamped\n")
            for m in self.paths:
                fh.write(f"{m.path},{m.terminal_I!r},{m.terminal_Im!r},"
                         f"{m.time_avg_infection!r},{m.lyapunov_rate!r},{m.clamped}\n")


def default_workers() -> int:
    cap = os.environ.get("LEVYEPI_WORKERS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, int(cap)) if int(cap) > 0 else n
        except ValueError:
            raise ValueError(f"LEVYEPI_WORKERS must be a positive integer, got {cap!r}")
    return max(1, n)


def _run_path(k, params, noise, jumps, config, init, with_aux, with_slln, window):
    metrics = PathMetrics(path=k)
    try:
        pn = path_noise(config.seed, k, config, jumps)
        traj = simulate(params, noise, jumps, config, init, k, path_noise_=pn)
    except NegativityError as exc:
        metrics.failed = True
        metrics.error = str(exc)
        return metrics
    metrics.terminal_I = float(traj.states[-1, 1])
    metrics.terminal_Im = float(traj.states[-1, 3])
    metrics.time_avg_infection = time_average(traj, "infected")
    metrics.clamped = traj.clamp_count
    metrics.n_jumps = int(traj.jump_times.size)
    if params.a == 0 or not config.saturated:
        if _hits_floor(traj, params, window):
            metrics.extinct_by_floor = True
        else:
            metrics.lyapunov_rate = extinction_rate(traj, params, window=window)
    if with_slln:
        diag = slln_diagnostics(traj, noise, jumps, increments=pn.dW)
        metrics.slln = {term: diag[term].tolist() for term in SLLN_TERMS}
        metrics.slln["t"] = diag["t"].tolist()
    if with_aux:
        xi = jumps.xi_matrix
        s1, _, s3, _ = noise.sigma
        x0 = np.asarray(init, dtype=float)
        psi = simulate_aux(params.lambda_h, params.mu_h, s1, xi[:, 0], config, max(x0[0], 1e-300),
                           jumps=jumps, path_index=k, role="B1", path_noise_=pn)
        psi_hat = simulate_aux(params.lambda_m, params.mu_m, s3, xi[:, 2], config,
                               max(x0[2], 1e-300), jumps=jumps, path_index=k, role="B3",
                               path_noise_=pn)
        metrics.aux = {
            "psi": time_average(psi),
            "psi_sq": time_average(psi, power=2),
            "psi_hat": time_average(psi_hat),
            "psi_hat_sq": time_average(psi_hat, power=2),
        }
    return metrics


def summarize(paths: list[PathMetrics], config: SimConfig, metadata: dict | None = None) -> EnsembleSummary:
    """Aggregate per-path metrics. The result does not depend on their order."""
    paths = sorted(paths, key=lambda m: m.path)
    ok = [m for m in paths if not m.failed]
    terminal = np.array([m.terminal_I + m.terminal_Im for m in ok])
    averages = np.array([m.time_avg_infection for m in ok])
    rates = np.array([m.lyapunov_rate for m in ok if not m.extinct_by_floor])
    aux = {}
    if ok and ok[0].aux:
        for key in ok[0].aux:
            aux[key] = _mean_se(np.array([m.aux[key] for m in ok]))
    slln = {}
    if ok and ok[0].slln:
        for term in SLLN_TERMS:
            final = np.array([m.slln[term][-1] for m in ok])
            per_checkpoint = np.array([m.slln[term] for m in ok])
            slln[term] = {
                "median_final": float(np.median(final)),
                "q95_final": float(np.quantile(final, 0.95)),
                "max_final": float(final.max()),
                "fraction_below_0.05": float(np.mean(final < 0.05)),
                "median_by_checkpoint": np.median(per_checkpoint, axis=0).tolist(),
            }
        slln["t"] = ok[0].slln["t"]
        slln["max_over_terms_final"] = max(slln[t]["max_final"] for t in SLLN_TERMS)
    total_steps = config.n_steps * max(len(ok), 1)
    return EnsembleSummary(
        n_paths=len(paths),
        n_failed=len(paths) - len(ok),
        terminal_infection=_quantiles(terminal),
        mean_time_avg_infection=_mean_se(averages),
        lyapunov_rate=_mean_se(rates),
        n_extinct_by_floor=sum(m.extinct_by_floor for m in ok),
        aux_avgs=aux,
        slln_residuals=slln,
        clamp_rate=sum(m.clamped for m in ok) / total_steps,
        paths=paths,
        metadata=dict(metadata or {}),
    )


def ensemble_run(scenario, n_paths: int, base_seed: int | None = None,
                 config: SimConfig | None = None, workers: int | None = None,
                 with_aux: bool = False, with_slln: bool = False,
                 window: float = 0.5) -> EnsembleSummary:
    """Simulate ``n_paths`` independent paths and aggregate their statistics.

    ``scenario`` needs ``model``, ``noise``, ``jumps``, ``init`` and ``sim``
    attributes. Path ``k`` draws from streams keyed by ``(base_seed, k)``, so
    the summary is the same for any number of workers.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    config = config or scenario.sim
    if base_seed is not None:
        config = replace(config, seed=base_seed)
    workers = workers or default_workers()
    args = (scenario.model, scenario.noise, scenario.jumps, config, tuple(scenario.init),
            with_aux, with_slln, window)
    if workers == 1:
        paths = [_run_path(k, *args) for k in range(n_paths)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            paths = list(pool.map(lambda k: _run_path(k, *args), range(n_paths)))
    metadata = {
        "dt": config.step,
        "t_end": config.t_end,
        "n_paths": n_paths,
        "seed": config.seed,
        "record_stride": config.record_stride,
        "positivity_policy": config.positivity_policy.value,
    }
    return summarize(paths, config, metadata)
