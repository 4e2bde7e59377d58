"""Parameters, state and coefficient functions of the dengue SIR-SI jump-diffusion.

The human compartments are ``S`` and ``I``; mosquitoes are ``S_m`` and ``I_m``.
Every compartment carries proportional white noise ``sigma_i * x_i dB_i`` and
proportional Levy jumps ``x_i(t-) * xi_i(u)`` driven by a compensated Poisson
random measure with a finite, atomic intensity measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "ModelParams",
    "NoiseParams",
    "JumpAtom",
    "JumpMeasure",
    "State",
    "AssumptionReport",
    "AssumptionError",
    "validate",
    "drift",
    "diffusion",
    "deterministic_rhs",
    "deterministic_r0",
    "endemic_equilibrium",
    "disease_free_state",
]

COMPARTMENTS = ("S", "I", "S_m", "I_m")


class AssumptionError(ValueError):
    """Raised when an input makes the model's coefficients undefined."""

    def __init__(self, assumption: str, message: str):
        super().__init__(f"{assumption}: {message}")
        self.assumption = assumption


@dataclass(frozen=True)
class ModelParams:
    """Deterministic rates (per day) of the dengue model.

    ``rho1`` is the combined recovery and treatment rate. ``a`` is the
    inhibition coefficient of the saturated incidence; the mass-action model
    is ``a == 0``.
    """

    lambda_h: float
    b: float
    beta: float
    mu_h: float
    rho0: float
    rho1: float
    lambda_m: float
    beta_m: float
    mu_m: float
    a: float = 0.0

    def __post_init__(self):
        for name in ("lambda_h", "b", "beta", "mu_h", "rho0", "rho1",
                     "lambda_m", "beta_m", "mu_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"model.{name} must be finite and > 0, got {value!r}")
        if not (math.isfinite(self.a) and self.a >= 0):
            raise ValueError(f"model.a must be finite and >= 0, got {self.a!r}")

    @property
    def rho(self) -> float:
        return self.rho0 + self.rho1

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class NoiseParams:
    """Brownian intensities ``(sigma1, sigma2, sigma3, sigma4)``."""

    sigma: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        sigma = tuple(float(s) for s in self.sigma)
        if len(sigma) != 4:
            raise ValueError(f"noise needs 4 intensities, got {len(sigma)}")
        for k, s in enumerate(sigma, start=1):
            if not (math.isfinite(s) and s >= 0):
                raise ValueError(f"noise.sigma{k} must be finite and >= 0, got {s!r}")
        object.__setattr__(self, "sigma", sigma)

    def as_array(self) -> np.ndarray:
        return np.array(self.sigma, dtype=float)


@dataclass(frozen=True)
class JumpAtom:
    mass: float
    xi: tuple[float, float, float, float]

    def __post_init__(self):
        # zero mass is allowed: such an atom never fires and adds nothing
        if not (math.isfinite(self.mass) and self.mass >= 0):
            raise ValueError(f"jump atom mass must be finite and >= 0, got {self.mass!r}")
        xi = tuple(float(x) for x in self.xi)
        if len(xi) != 4:
            raise ValueError(f"jump atom needs 4 intensities, got {len(xi)}")
        for k, x in enumerate(xi, start=1):
            if not math.isfinite(x):
                raise ValueError(f"xi{k} must be finite, got {x!r}")
            if x <= -1:
                raise AssumptionError("A2", f"jump intensity xi{k}={x} must be > -1")
        object.__setattr__(self, "xi", xi)


@dataclass(frozen=True)
class JumpMeasure:
    """Finite Levy measure given as weighted atoms.

    Integrals against the measure are sums over atoms, so every closed-form
    quantity below is evaluated exactly.
    """

    atoms: tuple[JumpAtom, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))

    @classmethod
    def single(cls, xi: Sequence[float], mass: float = 1.0) -> "JumpMeasure":
        return cls((JumpAtom(mass, tuple(xi)),))

    @classmethod
    def empty(cls) -> "JumpMeasure":
        return cls(())

    @property
    def total_mass(self) -> float:
        return float(sum(atom.mass for atom in self.atoms))

    @property
    def masses(self) -> np.ndarray:
        return np.array([atom.mass for atom in self.atoms], dtype=float)

    @property
    def xi_matrix(self) -> np.ndarray:
        """Array of shape ``(n_atoms, 4)``."""
        if not self.atoms:
            return np.zeros((0, 4))
        return np.array([atom.xi for atom in self.atoms], dtype=float)

    def integrate(self, values) -> float:
        """Sum of ``mass * value`` over atoms."""
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return 0.0
        return float(np.dot(self.masses, values))

    def compensator(self) -> np.ndarray:
        """Per-compartment ``sum(mass * xi_i)``."""
        if not self.atoms:
            return np.zeros(4)
        return self.masses @ self.xi_matrix


class State(NamedTuple):
    s: float
    i: float
    s_m: float
    i_m: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


def disease_free_state(params: ModelParams) -> State:
    return State(params.lambda_h / params.mu_h, 0.0, params.lambda_m / params.mu_m, 0.0)


@dataclass(frozen=True)
class AssumptionReport:
    p: float
    m1: float
    m2: float
    m3: float
    m4: float
    sigma_max: float
    xi_max: tuple[float, ...]
    xi_min: tuple[float, ...]
    theta_tilde: tuple[float, ...]
    theta_under: tuple[float, ...]
    theta_p: tuple[float, ...]
    varrho_p: float
    delta_p: float
    verdicts: dict = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return all(self.verdicts.values())


def _theta(x: np.ndarray, p: float) -> np.ndarray:
    # (1+x)^p for fractional p via exp(p*log1p(x)); x > -1 is guaranteed by A2
    return np.exp(p * np.log1p(x)) - p * x - 1.0


def validate(params: ModelParams, noise: NoiseParams, jumps: JumpMeasure,
             p: float = 2.5) -> AssumptionReport:
    """Evaluate the moment constants and the assumption verdicts A1-A5.

    Raises ``ValueError`` when ``p <= 2``. Jump intensities ``<= -1`` are
    already rejected when the ``JumpAtom`` is built.
    """
    if not (math.isfinite(p) and p > 2):
        raise ValueError(f"moment exponent p must be > 2, got {p!r}")
    xi = jumps.xi_matrix
    if np.any(xi <= -1):
        raise AssumptionError("A2", "every jump intensity must be > -1")
    sigma = noise.as_array()

    def colmax(values: np.ndarray) -> float:
        if values.size == 0:
            return 0.0
        return float(np.max(jumps.masses @ values))

    m1 = colmax(xi ** 2)
    m2 = colmax(xi - np.log1p(xi))
    m3 = colmax(((1.0 + xi) ** 2 - 1.0) ** 2)
    m4 = colmax(np.log1p(xi) ** 2)
    sigma_max = float(np.max(sigma ** 2))

    if xi.size:
        xi_max = xi.max(axis=1)
        xi_min = xi.min(axis=1)
    else:
        xi_max = xi_min = np.zeros(0)
    theta_tilde = _theta(xi_max, p)
    theta_under = _theta(xi_min, p)
    theta_p = np.maximum(theta_tilde, theta_under)
    varrho_p = jumps.integrate(theta_p)
    delta_p = min(params.mu_h, params.mu_m) - 0.5 * (p - 1.0) * sigma_max - varrho_p / p

    verdicts = {
        "A1": math.isfinite(m1),
        "A2": bool(np.all(xi > -1)) and math.isfinite(m2),
        "A3": delta_p > 0,
        "A4": math.isfinite(m3),
        "A5": math.isfinite(m4),
    }
    return AssumptionReport(
        p=float(p), m1=m1, m2=m2, m3=m3, m4=m4, sigma_max=sigma_max,
        xi_max=tuple(xi_max.tolist()), xi_min=tuple(xi_min.tolist()),
        theta_tilde=tuple(theta_tilde.tolist()),
        theta_under=tuple(theta_under.tolist()),
        theta_p=tuple(theta_p.tolist()),
        varrho_p=varrho_p, delta_p=float(delta_p), verdicts=verdicts,
    )


def _incidence(params: ModelParams, s, i_m, saturated: bool):
    force = params.b * params.beta * s * i_m
    if saturated and params.a > 0:
        force = force / (1.0 + params.a * i_m)
    return force


def deterministic_rhs(state, params: ModelParams, saturated: bool = True) -> np.ndarray:
    """Vector field of the noiseless model (incidence saturates when ``a > 0``)."""
    s, i, s_m, i_m = np.asarray(state, dtype=float)
    human = _incidence(params, s, i_m, saturated)
    vector = params.b * params.beta_m * s_m * i
    return np.array([
        params.lambda_h - human - params.mu_h * s,
        human - (params.mu_h + params.rho) * i,
        params.lambda_m - vector - params.mu_m * s_m,
        vector - params.mu_m * i_m,
    ])


def drift(state, params: ModelParams, jumps: JumpMeasure = JumpMeasure(),
          saturated: bool = False) -> np.ndarray:
    """Effective drift between jump events.

    This is the model vector field plus the compensator correction
    ``-x_i * sum(mass * xi_i)`` from writing the compensated measure as
    ``N(dt, du) - nu(du) dt``.
    """
    x = np.asarray(state, dtype=float)
    return deterministic_rhs(x, params, saturated=saturated) - x * jumps.compensator()


def diffusion(state, noise: NoiseParams) -> np.ndarray:
    return noise.as_array() * np.asarray(state, dtype=float)


def deterministic_r0(params: ModelParams) -> float:
    p = params
    return (p.b ** 2 * p.beta * p.lambda_h * p.beta_m * p.lambda_m
            / (p.mu_h * (p.mu_h + p.rho) * p.mu_m ** 2))


def endemic_equilibrium(params: ModelParams) -> State | None:
    """Endemic steady state of the noiseless model, or ``None`` when ``R0 <= 1``.

    Obtained by eliminating ``S``, ``I`` and ``S_m`` from the four steady-state
    equations; the result is checked against the vector field in the tests.
    """
    r0 = deterministic_r0(params)
    if r0 <= 1.0:
        return None
    p = params
    gamma = p.mu_h + p.rho
    i_m = (p.mu_h * p.mu_m * gamma * (r0 - 1.0)
           / (p.mu_m * (p.mu_h * p.a + p.b * p.beta) * gamma
              + p.b ** 2 * p.beta * p.beta_m * p.lambda_h))
    free_m = p.lambda_m - p.mu_m * i_m
    s = p.mu_m ** 2 * gamma * (1.0 + p.a * i_m) / (p.b ** 2 * p.beta * p.beta_m * free_m)
    i = p.mu_m ** 2 * i_m / (p.b * p.beta_m * free_m)
    s_m = p.lambda_m / p.mu_m - i_m
    return State(float(s), float(i), float(s_m), float(i_m))
