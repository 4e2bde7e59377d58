"""Euler-Maruyama integration with exact compound-Poisson jumps.

Between jump events every step is a plain Euler-Maruyama update of the
compensated drift and proportional diffusion. A step that contains jump
events is split at the jump times; the Brownian increment of the step is
shared out over the pieces with a Brownian bridge, so the grid increments
(and therefore replays and couplings) are unchanged by the split.
"""

from __future__ import annotations

import enum
import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import JumpAtom, JumpMeasure, ModelParams, NoiseParams, State
from .streams import check_seed, poisson_times, stream

__all__ = [
    "PositivityPolicy",
    "SimConfig",
    "NegativityError",
    "PathNoise",
    "Trajectory",
    "AuxTrajectory",
    "path_noise",
    "integrate",
    "simulate",
    "simulate_aux",
    "simulate_coupled",
    "replay_increments",
    "write_trajectory_csv",
    "write_jump_csv",
    "read_trajectory_csv",
]

_DENGUE = 0
_LINEAR = 1


class PositivityPolicy(str, enum.Enum):
    CLAMP = "ClampToZero"
    REJECT = "Reject"


class NegativityError(RuntimeError):
    def __init__(self, time: float, component: int, name: str = ""):
        label = name or f"component {component}"
        super().__init__(f"{label} became negative at t={time:.6g}")
        self.time = time
        self.component = component


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_end: float = 200.0
    seed: int = 0
    record_stride: int = 1
    positivity_policy: PositivityPolicy = PositivityPolicy.CLAMP
    saturated: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"sim.dt must be > 0, got {self.dt!r}")
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ValueError(f"sim.t_end must be > 0, got {self.t_end!r}")
        if self.dt > self.t_end:
            raise ValueError(f"sim.dt={self.dt} exceeds sim.t_end={self.t_end}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError(f"sim.record_stride must be an integer >= 1, got {self.record_stride!r}")
        object.__setattr__(self, "record_stride", int(self.record_stride))
        object.__setattr__(self, "seed", check_seed(self.seed))
        object.__setattr__(self, "positivity_policy", PositivityPolicy(self.positivity_policy))
        object.__setattr__(self, "saturated", bool(self.saturated))

    @property
    def n_steps(self) -> int:
        # the grid always ends exactly at t_end; dt is shrunk slightly if needed
        return max(1, math.ceil(self.t_end / self.dt - 1e-9))

    @property
    def step(self) -> float:
        return self.t_end / self.n_steps


@dataclass
class PathNoise:
    """All randomness consumed by one path.

    ``dW`` holds the Brownian increments on the regular grid, one column per
    role. ``bridge`` holds one standard normal per jump and role, used to
    split the enclosing step at the jump time.
    """

    dW: np.ndarray
    bridge: np.ndarray
    jump_times: np.ndarray
    jump_marks: np.ndarray
    roles: tuple
    digest: str


def _digest(dW: np.ndarray, jump_times: np.ndarray, jump_marks: np.ndarray) -> str:
    h = hashlib.blake2b(digest_size=16)
    h.update(np.ascontiguousarray(dW).tobytes())
    h.update(np.ascontiguousarray(jump_times).tobytes())
    h.update(np.ascontiguousarray(jump_marks, dtype=np.int64).tobytes())
    return h.hexdigest()


def path_noise(seed: int, path: int, config: SimConfig, jumps: JumpMeasure,
               roles=("B1", "B2", "B3", "B4")) -> PathNoise:
    n = config.n_steps
    h = config.step
    rate = jumps.total_mass
    jt = poisson_times(stream(seed, path, "jump_times"), rate, config.t_end)
    if jt.size:
        probs = jumps.masses / rate
        marks = stream(seed, path, "jump_marks").choice(len(probs), size=jt.size, p=probs)
    else:
        marks = np.zeros(0, dtype=np.int64)
    dW = np.empty((n, len(roles)))
    bridge = np.empty((jt.size, len(roles)))
    sqh = math.sqrt(h)
    for k, role in enumerate(roles):
        gen = stream(seed, path, role)
        dW[:, k] = gen.standard_normal(n) * sqh
        bridge[:, k] = gen.standard_normal(jt.size)
    return PathNoise(dW=dW, bridge=bridge, jump_times=jt, jump_marks=marks.astype(np.int64),
                     roles=tuple(roles), digest=_digest(dW, jt, marks))


@numba.njit(cache=True, inline="always")
def _drift_into(kind, P, x, comp, out):
    if kind == 0:
        s, i, sm, im = x[0], x[1], x[2], x[3]
        lam, b, beta, mu, rho, lam_m, beta_m, mu_m, a, sat = (
            P[0], P[1], P[2], P[3], P[4], P[5], P[6], P[7], P[8], P[9])
        human = b * beta * s * im
        if sat > 0.5 and a > 0.0:
            human = human / (1.0 + a * im)
        vector = b * beta_m * sm * i
        out[0] = lam - human - mu * s - comp[0] * s
        out[1] = human - (mu + rho) * i - comp[1] * i
        out[2] = lam_m - vector - mu_m * sm - comp[2] * sm
        out[3] = vector - mu_m * im - comp[3] * im
    else:
        out[0] = P[0] - P[1] * x[0] - comp[0] * x[0]


@numba.njit(cache=True, nogil=True)
def _integrate_kernel(kind, P, x0, sigma, comp, h, n_steps, dW, jump_times, jump_marks,
                      atom_xi, bridge, stride, reject):
    d = x0.shape[0]
    n_rec = n_steps // stride + 1
    if n_steps % stride != 0:
        n_rec += 1
    rec = np.empty((n_rec, d))
    rec_t = np.empty(n_rec)
    pre = np.empty((jump_times.shape[0], d))
    x = x0.copy()
    f = np.empty(d)
    rem = np.empty(d)
    rec[0, :] = x
    rec_t[0] = 0.0
    r = 1
    j = 0
    m = jump_times.shape[0]
    clamp_steps = 0
    fail_time = -1.0
    fail_comp = -1
    for k in range(n_steps):
        t0 = k * h
        t1 = (k + 1) * h
        cur = t0
        for c in range(d):
            rem[c] = dW[k, c]
        clamped = False
        while j < m and jump_times[j] <= t1:
            tau = jump_times[j]
            if tau < cur:
                tau = cur
            span = t1 - cur
            s = tau - cur
            if span > 0.0:
                w = s / span
                sd = math.sqrt(max(s * (span - s) / span, 0.0))
            else:
                w = 0.0
                sd = 0.0
            _drift_into(kind, P, x, comp, f)
            for c in range(d):
                inc = w * rem[c] + sd * bridge[j, c]
                rem[c] -= inc
                x[c] += f[c] * s + sigma[c] * x[c] * inc
                if x[c] < 0.0:
                    if reject:
                        return rec, rec_t, pre, clamp_steps, tau, c
                    x[c] = 0.0
                    clamped = True
            for c in range(d):
                pre[j, c] = x[c]
                x[c] *= 1.0 + atom_xi[jump_marks[j], c]
            cur = tau
            j += 1
        s = t1 - cur
        _drift_into(kind, P, x, comp, f)
        for c in range(d):
            x[c] += f[c] * s + sigma[c] * x[c] * rem[c]
            if x[c] < 0.0:
                if reject:
                    return rec, rec_t, pre, clamp_steps, t1, c
                x[c] = 0.0
                clamped = True
        if clamped:
            clamp_steps += 1
        if (k + 1) % stride == 0 or k + 1 == n_steps:
            rec[r, :] = x
            rec_t[r] = t1
            r += 1
    return rec, rec_t, pre, clamp_steps, fail_time, fail_comp


def _dengue_vector(params: ModelParams, saturated: bool) -> np.ndarray:
    p = params
    return np.array([p.lambda_h, p.b, p.beta, p.mu_h, p.rho, p.lambda_m, p.beta_m,
                     p.mu_m, p.a, 1.0 if saturated else 0.0])


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    jump_times: np.ndarray
    jump_atoms: np.ndarray
    jump_pre_states: np.ndarray
    clamp_count: int
    n_steps: int
    brownian_increments_digest: str
    seed: int = 0
    path_index: int = 0
    config: SimConfig | None = None
    roles: tuple = ("B1", "B2", "B3", "B4")

    @property
    def jump_events(self) -> list:
        return [(float(t), int(a), State(*pre))
                for t, a, pre in zip(self.jump_times, self.jump_atoms, self.jump_pre_states)]

    @property
    def clamp_rate(self) -> float:
        return self.clamp_count / self.n_steps

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def component(self, name) -> np.ndarray:
        if isinstance(name, int):
            return self.states[:, name]
        index = {"S": 0, "I": 1, "S_m": 2, "I_m": 3, "s": 0, "i": 1, "s_m": 2, "i_m": 3}
        return self.states[:, index[name]]

    @property
    def infected(self) -> np.ndarray:
        return self.states[:, 1] + self.states[:, 3]


@dataclass
class AuxTrajectory:
    times: np.ndarray
    values: np.ndarray
    jump_times: np.ndarray
    jump_atoms: np.ndarray
    jump_pre_values: np.ndarray
    clamp_count: int
    n_steps: int
    brownian_increments_digest: str
    seed: int = 0
    path_index: int = 0
    config: SimConfig | None = None
    roles: tuple = ("B1",)

    @property
    def states(self) -> np.ndarray:
        return self.values[:, None]

    @property
    def clamp_rate(self) -> float:
        return self.clamp_count / self.n_steps

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


def integrate(kind_params, init, sigma, compensator, atom_xi, noise: PathNoise,
              config: SimConfig, names=("S", "I", "S_m", "I_m")):
    """Run the kernel on prepared noise. Returns the raw kernel outputs.

    ``kind_params`` is either a ``ModelParams`` (four-compartment model) or a
    ``(recruitment, death)`` pair for the scalar auxiliary process.
    """
    if isinstance(kind_params, ModelParams):
        kind = _DENGUE
        P = _dengue_vector(kind_params, config.saturated)
    else:
        kind = _LINEAR
        P = np.asarray(kind_params, dtype=float)
    x0 = np.asarray(init, dtype=float).copy()
    if np.any(x0 < 0) or not np.all(np.isfinite(x0)):
        raise ValueError(f"initial state must be finite and nonnegative, got {x0.tolist()}")
    atom_xi = np.asarray(atom_xi, dtype=float).reshape(-1, x0.size)
    if atom_xi.shape[0] == 0:
        atom_xi = np.zeros((1, x0.size))
    reject = config.positivity_policy is PositivityPolicy.REJECT
    rec, rec_t, pre, clamps, fail_t, fail_c = _integrate_kernel(
        kind, P, x0, np.asarray(sigma, dtype=float), np.asarray(compensator, dtype=float),
        config.step, config.n_steps, noise.dW, noise.jump_times, noise.jump_marks,
        atom_xi, noise.bridge, config.record_stride, reject)
    if fail_c >= 0:
        raise NegativityError(float(fail_t), int(fail_c), names[int(fail_c)])
    # exact grid instants; the kernel's k*h products can differ in the last bit
    rec_t = np.minimum(rec_t, config.t_end)
    rec_t[-1] = config.t_end
    return rec, rec_t, pre, int(clamps)


def _warn_rate(config: SimConfig, jumps: JumpMeasure):
    if config.step * jumps.total_mass >= 1.0:
        warnings.warn(f"dt * nu(U) = {config.step * jumps.total_mass:.3g} >= 1; "
                      "several jumps per step are likely", RuntimeWarning, stacklevel=3)


def simulate(params: ModelParams, noise: NoiseParams, jumps: JumpMeasure, config: SimConfig,
             init, path_index: int = 0, path_noise_: PathNoise | None = None) -> Trajectory:
    """Simulate one path of the four-compartment jump-diffusion.

    The path is a deterministic function of ``(config.seed, path_index)`` and
    the inputs. Pass ``path_noise_`` to drive the integrator with explicit
    noise instead (used for couplings and refinement studies).
    """
    _warn_rate(config, jumps)
    pn = path_noise_ if path_noise_ is not None else path_noise(config.seed, path_index, config, jumps)
    rec, rec_t, pre, clamps = integrate(params, init, noise.as_array(), jumps.compensator(),
                                        jumps.xi_matrix, pn, config)
    return Trajectory(times=rec_t, states=rec, jump_times=pn.jump_times.copy(),
                      jump_atoms=pn.jump_marks.copy(), jump_pre_states=pre, clamp_count=clamps,
                      n_steps=config.n_steps, brownian_increments_digest=pn.digest,
                      seed=config.seed, path_index=path_index, config=config, roles=pn.roles)


def simulate_aux(recruitment: float, death: float, sigma: float, xi_row, config: SimConfig,
                 init: float, jumps: JumpMeasure | None = None, path_index: int = 0,
                 role: str = "B1", path_noise_: PathNoise | None = None) -> AuxTrajectory:
    """Simulate the scalar process ``dX = (recruitment - death X) dt + sigma X dB + jumps``.

    ``xi_row`` holds this process's jump intensity at each atom of ``jumps``
    (all atoms share the jump clock of the main model). When ``jumps`` is
    omitted a unit-mass atom per entry of ``xi_row`` is assumed. ``role``
    picks the Brownian stream, so ``"B1"`` reproduces the increments that
    drive ``S`` and ``"B3"`` those that drive ``S_m``.
    """
    if not init > 0:
        raise ValueError(f"auxiliary initial value must be > 0, got {init!r}")
    xi_row = np.atleast_1d(np.asarray(xi_row, dtype=float))
    if np.any(xi_row <= -1):
        raise ValueError("auxiliary jump intensities must be > -1")
    if jumps is None:
        jumps = JumpMeasure(tuple(JumpAtom(1.0, (float(x), 0.0, 0.0, 0.0)) for x in xi_row))
    elif len(jumps.atoms) != xi_row.size:
        raise ValueError("xi_row needs one entry per jump atom")
    _warn_rate(config, jumps)
    pn = path_noise_ if path_noise_ is not None else path_noise(
        config.seed, path_index, config, jumps, roles=(role,))
    col = pn.roles.index(role)
    sub = PathNoise(dW=np.ascontiguousarray(pn.dW[:, col:col + 1]),
                    bridge=np.ascontiguousarray(pn.bridge[:, col:col + 1]),
                    jump_times=pn.jump_times, jump_marks=pn.jump_marks, roles=(role,),
                    digest=_digest(pn.dW[:, col:col + 1], pn.jump_times, pn.jump_marks))
    comp = np.array([jumps.integrate(xi_row)])
    rec, rec_t, pre, clamps = integrate((recruitment, death), [init], [sigma], comp,
                                        xi_row.reshape(-1, 1), sub, config, names=("aux",))
    return AuxTrajectory(times=rec_t, values=rec[:, 0], jump_times=sub.jump_times.copy(),
                         jump_atoms=sub.jump_marks.copy(), jump_pre_values=pre[:, 0],
                         clamp_count=clamps, n_steps=config.n_steps,
                         brownian_increments_digest=sub.digest, seed=config.seed,
                         path_index=path_index, config=config, roles=(role,))


def simulate_coupled(params: ModelParams, noise: NoiseParams, jumps: JumpMeasure,
                     config: SimConfig, init, path_index: int = 0):
    """Simulate the model together with its two dominating auxiliary processes.

    The auxiliary processes start at ``S(0)`` and ``S_m(0)`` and consume the
    same ``B1``/``B3`` increments and the same jump events as the model, so
    ``S <= Psi`` and ``S_m <= Psi_hat`` can be checked pointwise.
    """
    init = State(*[float(v) for v in init])
    pn = path_noise(config.seed, path_index, config, jumps)
    traj = simulate(params, noise, jumps, config, init, path_index, path_noise_=pn)
    xi = jumps.xi_matrix
    s1, _, s3, _ = noise.sigma
    psi = simulate_aux(params.lambda_h, params.mu_h, s1, xi[:, 0], config, init.s,
                       jumps=jumps, path_index=path_index, role="B1", path_noise_=pn)
    psi_hat = simulate_aux(params.lambda_m, params.mu_m, s3, xi[:, 2], config, init.s_m,
                           jumps=jumps, path_index=path_index, role="B3", path_noise_=pn)
    return traj, psi, psi_hat


def replay_increments(traj) -> np.ndarray:
    """Regenerate the grid Brownian increments of a simulated path.

    Returns an array of shape ``(n_steps, n_roles)`` and checks it against the
    digest stored on the trajectory.
    """
    config = traj.config
    if config is None:
        raise ValueError("trajectory carries no SimConfig; cannot replay")
    n = config.n_steps
    sqh = math.sqrt(config.step)
    dW = np.empty((n, len(traj.roles)))
    for k, role in enumerate(traj.roles):
        dW[:, k] = stream(traj.seed, traj.path_index, role).standard_normal(n) * sqh
    if _digest(dW, traj.jump_times, traj.jump_atoms) != traj.brownian_increments_digest:
        raise ValueError("replayed increments do not match the trajectory digest")
    return dW


def _comment_lines(metadata: dict | None) -> list[str]:
    if not metadata:
        return []
    return [f"# {key}={value}" for key, value in metadata.items()]


def write_trajectory_csv(traj: Trajectory, path, metadata: dict | None = None):
    """Write ``t,S,I,S_m,I_m`` rows, preceded by ``# key=value`` metadata lines."""
    with open(path, "w", newline="") as fh:
        for line in _comment_lines(metadata):
            fh.write(line + "\n")
        fh.write("t,S,I,S_m,I_m\n")
        for t, row in zip(traj.times, traj.states):
            fh.write(",".join(repr(float(v)) for v in (t, *row)) + "\n")


def write_jump_csv(traj: Trajectory, path, metadata: dict | None = None):
    with open(path, "w", newline="") as fh:
        for line in _comment_lines(metadata):
            fh.write(line + "\n")
        fh.write("t,atom,S_pre,I_pre,S_m_pre,I_m_pre\n")
        for t, atom, pre in zip(traj.jump_times, traj.jump_atoms, traj.jump_pre_states):
            fh.write(f"{float(t)!r},{int(atom)}," + ",".join(repr(float(v)) for v in pre) + "\n")


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray, dict]:
    """Read a trajectory CSV back as ``(times, states, metadata)``."""
    metadata = {}
    rows = []
    header = None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                metadata[key] = value
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append([float(v) for v in line.split(",")])
    if header != ["t", "S", "I", "S_m", "I_m"]:
        raise ValueError(f"unexpected trajectory header {header}")
    data = np.array(rows, dtype=float).reshape(-1, 5)
    return data[:, 0], data[:, 1:], metadata
