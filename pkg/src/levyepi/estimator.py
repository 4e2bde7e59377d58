"""scikit-learn style wrapper around the simulator.

``fit`` evaluates the closed-form thresholds for the configured scenario.
``transform`` maps initial states to per-path summary features by simulating
one path per row. ``predict`` flags rows whose simulated infection dies out.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .engine import PositivityPolicy, SimConfig, simulate
from .estimators import _hits_floor, extinction_rate, time_average
from .model import JumpAtom, JumpMeasure, ModelParams, NoiseParams, State
from .scenario import Scenario
from .thresholds import classify

FEATURES = ("terminal_I", "terminal_Im", "time_avg_infection", "lyapunov_rate", "clamp_count")


def check_state_array(X) -> np.ndarray:
    """Validate a batch of initial states: finite, nonnegative, shape ``(n, 4)``."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 4:
        raise ValueError(f"expected 4 columns (S, I, S_m, I_m), got {X.shape[1]}")
    if np.any(X < 0):
        raise ValueError("initial states must be nonnegative")
    return X


class DengueLevySimulator(TransformerMixin, BaseEstimator):
    """Simulator for the dengue jump-diffusion with an estimator interface.

    Defaults reproduce the ``table1-extinction`` preset. Jumps are given as
    ``jump_xi`` (one 4-tuple per atom) and ``jump_mass`` (one mass per atom).
    """

    def __init__(self, lambda_h=0.5, b=3.0, beta=0.15, mu_h=0.8, rho0=0.8, rho1=0.02,
                 lambda_m=0.6, beta_m=0.55, mu_m=0.9,
                 sigma=(0.269, 0.25, 0.25, 0.13),
                 jump_xi=((-0.75, 0.8, -0.9, 0.85),), jump_mass=(1.0,),
                 p=2.5, dt=1e-3, t_end=200.0, seed=0, record_stride=1,
                 positivity_policy="ClampToZero", extinction_tol=1e-3):
        self.lambda_h = lambda_h
        self.b = b
        self.beta = beta
        self.mu_h = mu_h
        self.rho0 = rho0
        self.rho1 = rho1
        self.lambda_m = lambda_m
        self.beta_m = beta_m
        self.mu_m = mu_m
        self.sigma = sigma
        self.jump_xi = jump_xi
        self.jump_mass = jump_mass
        self.p = p
        self.dt = dt
        self.t_end = t_end
        self.seed = seed
        self.record_stride = record_stride
        self.positivity_policy = positivity_policy
        self.extinction_tol = extinction_tol

    @classmethod
    def from_scenario(cls, scenario: Scenario, **overrides) -> "DengueLevySimulator":
        m, sim = scenario.model, scenario.sim
        if m.a != 0:
            raise ValueError("the estimator wrapper covers the mass-action model only")
        kw = dict(
            lambda_h=m.lambda_h, b=m.b, beta=m.beta, mu_h=m.mu_h, rho0=m.rho0, rho1=m.rho1,
            lambda_m=m.lambda_m, beta_m=m.beta_m, mu_m=m.mu_m, sigma=scenario.noise.sigma,
            jump_xi=tuple(a.xi for a in scenario.jumps.atoms),
            jump_mass=tuple(a.mass for a in scenario.jumps.atoms),
            p=scenario.p, dt=sim.dt, t_end=sim.t_end, seed=sim.seed,
            record_stride=sim.record_stride, positivity_policy=sim.positivity_policy.value,
        )
        kw.update(overrides)
        return cls(**kw)

    def _build(self):
        model = ModelParams(self.lambda_h, self.b, self.beta, self.mu_h, self.rho0, self.rho1,
                            self.lambda_m, self.beta_m, self.mu_m)
        if len(self.jump_xi) != len(self.jump_mass):
            raise ValueError("jump_xi and jump_mass need the same number of atoms")
        jumps = JumpMeasure(tuple(JumpAtom(float(w), tuple(x))
                                  for x, w in zip(self.jump_xi, self.jump_mass)))
        config = SimConfig(dt=self.dt, t_end=self.t_end, seed=self.seed,
                           record_stride=self.record_stride,
                           positivity_policy=PositivityPolicy(self.positivity_policy))
        return model, NoiseParams(tuple(self.sigma)), jumps, config

    def fit(self, X=None, y=None):
        """Validate the parameters and evaluate the thresholds."""
        if X is not None:
            self.n_features_in_ = check_state_array(X).shape[1]
        model, noise, jumps, config = self._build()
        self.model_, self.noise_, self.jumps_, self.config_ = model, noise, jumps, config
        self.report_ = classify(model, noise, jumps, self.p)
        self.verdict_ = self.report_.verdict
        return self

    def _path_features(self, k, x0):
        traj = simulate(self.model_, self.noise_, self.jumps_, self.config_, State(*x0), path_index=k)
        if _hits_floor(traj, self.model_, 0.5):
            rate = np.nan
        else:
            rate = extinction_rate(traj, self.model_)
        return [traj.states[-1, 1], traj.states[-1, 3], time_average(traj, "infected"),
                rate, traj.clamp_count]

    def transform(self, X):
        """One simulated path per row of initial states. Row ``k`` uses path index ``k``."""
        check_is_fitted(self, "report_")
        X = check_state_array(X)
        return np.array([self._path_features(k, row) for k, row in enumerate(X)], dtype=float)

    def predict(self, X):
        """1 where terminal ``I + I_m`` falls below ``extinction_tol``, else 0."""
        features = self.transform(X)
        return (features[:, 0] + features[:, 1] < self.extinction_tol).astype(int)

    def get_feature_names_out(self, input_features=None):
        return np.array(FEATURES, dtype=object)
