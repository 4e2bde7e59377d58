"""Verification routines behind ``levyepi verify``.

Each routine returns a list of check records::

    {"check": str, "value": float, "target": float, "tolerance": float,
     "passed": bool, "note": str}

Published values that do not follow from their own closed form are flagged
with ``known_discrepancy`` and do not count towards the overall verdict.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .engine import SimConfig, path_noise, simulate_aux, simulate_coupled
from .estimators import SLLN_TERMS, default_workers, ensemble_run, time_average
from .thresholds import (
    REFERENCE_EXTINCTION,
    REFERENCE_EXTINCTION_KAPPA_ALT,
    REFERENCE_PERSISTENCE,
    Verdict,
    classify,
    compare_with_reference,
    r0_tilde_from_m,
    upsilons,
)

# published entries that disagree with the formula evaluated on the same inputs
KNOWN_DISCREPANCIES = {
    "table1-extinction": {"frak_c", "kappa"},
    "table1-persistence": {"delta_p", "m4", "M2", "M3", "M4", "r0_tilde"},
}

REFERENCES = {
    "table1-extinction": REFERENCE_EXTINCTION,
    "table1-persistence": REFERENCE_PERSISTENCE,
}

EXPECTED_VERDICTS = {
    "table1-extinction": Verdict.EXTINCTION,
    "table1-persistence": Verdict.PERSISTENCE,
}


def _record(check, value, target, tolerance, passed, note="", **extra):
    out = {"check": check, "value": float(value), "target": float(target),
           "tolerance": float(tolerance), "passed": bool(passed), "note": note}
    out.update(extra)
    return out


def overall(records) -> bool:
    return all(r["passed"] for r in records if not r.get("known_discrepancy"))


def check_tables(scenario, tol: float = 1e-3) -> list[dict]:
    """Closed-form values against the published ones for a preset scenario."""
    reference = REFERENCES.get(scenario.name)
    if reference is None:
        raise ValueError(f"no published reference values for scenario {scenario.name!r}; "
                         f"available: {', '.join(REFERENCES)}")
    known = KNOWN_DISCREPANCIES.get(scenario.name, set())
    records = []
    rows = compare_with_reference(scenario.model, scenario.noise, scenario.jumps, reference,
                                  p=scenario.p, tol=tol)
    for row in rows:
        flagged = row["quantity"] in known
        records.append(_record(row["quantity"], row["computed"], row["published"], tol,
                               row["match"], "published value disagrees with its formula" if flagged else "",
                               known_discrepancy=flagged))
    if scenario.name == "table1-extinction":
        rep = classify(scenario.model, scenario.noise, scenario.jumps, scenario.p)
        records.append(_record("kappa_alt", rep.kappa, REFERENCE_EXTINCTION_KAPPA_ALT, tol,
                               abs(rep.kappa - REFERENCE_EXTINCTION_KAPPA_ALT) <= tol,
                               "second published kappa", known_discrepancy=True))
    if scenario.name == "table1-persistence":
        printed_m = [reference[f"M{k}"] for k in range(1, 5)]
        value = r0_tilde_from_m(scenario.model, printed_m)
        records.append(_record("r0_tilde_from_published_m", value, reference["r0_tilde"], tol,
                               abs(value - reference["r0_tilde"]) <= tol))
    expected = EXPECTED_VERDICTS.get(scenario.name)
    if expected is not None:
        rep = classify(scenario.model, scenario.noise, scenario.jumps, scenario.p)
        records.append(_record("verdict", float(rep.verdict == expected), 1.0, 0.0,
                               rep.verdict == expected, f"{rep.verdict.value} (expected {expected.value})"))
    return records


def _aux_path(k, scenario, config):
    model, noise, jumps = scenario.model, scenario.noise, scenario.jumps
    pn = path_noise(config.seed, k, config, jumps, roles=("B1", "B3"))
    xi = jumps.xi_matrix
    s1, _, s3, _ = noise.sigma
    psi = simulate_aux(model.lambda_h, model.mu_h, s1, xi[:, 0], config, scenario.init.s,
                       jumps=jumps, path_index=k, role="B1", path_noise_=pn)
    psi_hat = simulate_aux(model.lambda_m, model.mu_m, s3, xi[:, 2], config, scenario.init.s_m,
                           jumps=jumps, path_index=k, role="B3", path_noise_=pn)
    return (time_average(psi), time_average(psi, power=2),
            time_average(psi_hat), time_average(psi_hat, power=2))


def aux_time_averages(scenario, n_paths: int, config: SimConfig | None = None,
                      workers: int | None = None) -> np.ndarray:
    """Per-path time averages ``(Psi, Psi^2, Psi_hat, Psi_hat^2)``, shape ``(n_paths, 4)``."""
    config = config or scenario.sim
    workers = workers or default_workers()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda k: _aux_path(k, scenario, config), range(n_paths)))
    return np.array(rows)


def check_aux_limits(scenario, n_paths: int = 100, config: SimConfig | None = None,
                     workers: int | None = None, tol_mean: float = 0.05,
                     tol_square: float = 0.10) -> list[dict]:
    """Ensemble time averages of the auxiliary processes against their long-run limits."""
    m = scenario.model
    ups, ups_hat = upsilons(m, scenario.noise, scenario.jumps)
    targets = (m.lambda_h / m.mu_h, 2 * m.lambda_h ** 2 / (m.mu_h * ups),
               m.lambda_m / m.mu_m, 2 * m.lambda_m ** 2 / (m.mu_m * ups_hat))
    tols = (tol_mean, tol_square, tol_mean, tol_square)
    names = ("psi_mean", "psi_square_mean", "psi_hat_mean", "psi_hat_square_mean")
    means = aux_time_averages(scenario, n_paths, config, workers).mean(axis=0)
    return [_record(name, value, target, tol, abs(value / target - 1) <= tol, "relative tolerance")
            for name, value, target, tol in zip(names, means, targets, tols)]


def _comparison_path(k, scenario, config, slack):
    traj, psi, psi_hat = simulate_coupled(scenario.model, scenario.noise, scenario.jumps,
                                          config, scenario.init, path_index=k)
    gap = traj.states[:, 0] - psi.values
    gap_hat = traj.states[:, 2] - psi_hat.values
    return (int(np.sum(gap > slack)), int(np.sum(gap_hat > slack)),
            float(gap.max()), float(gap_hat.max()))


def check_comparison(scenario, n_paths: int = 100, config: SimConfig | None = None,
                     workers: int | None = None, slack: float = 1e-9) -> list[dict]:
    """Count grid points where ``S > Psi`` or ``S_m > Psi_hat`` beyond ``slack``."""
    config = config or scenario.sim
    workers = workers or default_workers()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = np.array(list(pool.map(lambda k: _comparison_path(k, scenario, config, slack),
                                      range(n_paths))))
    return [
        _record("S_above_psi_points", rows[:, 0].sum(), 0, 0, rows[:, 0].sum() == 0,
                f"largest S - Psi = {rows[:, 2].max():.3g}"),
        _record("S_m_above_psi_hat_points", rows[:, 1].sum(), 0, 0, rows[:, 1].sum() == 0,
                f"largest S_m - Psi_hat = {rows[:, 3].max():.3g}"),
    ]


def check_slln(scenario, n_paths: int = 100, config: SimConfig | None = None,
               workers: int | None = None, threshold: float = 0.05,
               fraction: float = 0.95) -> list[dict]:
    """Martingale terms divided by time: small at ``T`` on most paths and decaying."""
    summary = ensemble_run(scenario, n_paths, config=config, workers=workers, with_slln=True)
    ok = [m for m in summary.paths if not m.failed]
    records = []
    for term in SLLN_TERMS:
        final = np.array([m.slln[term][-1] for m in ok])
        frac = float(np.mean(final < threshold))
        records.append(_record(f"{term} fraction below {threshold}", frac, fraction, 0.0,
                               frac >= fraction, f"median {np.median(final):.3g}"))
    for term in SLLN_TERMS:
        med = np.median(np.array([m.slln[term] for m in ok]), axis=0)
        # checkpoints are T/16, T/8, T/4, T/2, T
        records.append(_record(f"{term} median decays from T/4 to T", med[4], med[2], 0.0,
                               med[4] < med[2] or med[2] == 0.0))
    return records


TARGETS = {
    "tables": check_tables,
    "lemma2": check_aux_limits,
    "comparison": check_comparison,
    "slln": check_slln,
}
