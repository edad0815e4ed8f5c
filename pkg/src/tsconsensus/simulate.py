"""Stepping the leader-following error dynamics across a time scale.

Right-scattered points take the exact forward step
``eps(sigma(t)) = eps(t) + mu(t) * (F(t, x) - F(t, x0 1) - gamma(t) B eps(t))``.
Dense runs are integrated with fixed-step classical RK4. The step is
``min(h, run length / 8)`` so short runs still get several steps.

:func:`variation_of_constants` is an independent solver for affine ``F``.
It works mode by mode in the eigenbasis of ``B`` and serves as the oracle
for :func:`run`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .certify import EnvelopeTable
from .quadrature import adaptive_simpson
from .spectral import BoundConstants, EigenSystem, compute_bound_constants, eigendecompose
from .system import StabilitySystem
from .timescale import TOL, TimeScale, WindowError, decompose, dense_pieces, mu, scattered_points

DEFAULT_STEP = 1e-3
DEFAULT_DENSE_SAMPLES = 64


class NotScattered(ValueError):
    pass


class NotDense(ValueError):
    pass


class UnsupportedDynamics(TypeError):
    pass


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    classes: tuple[str, ...]
    eps: np.ndarray  # shape (samples, n)
    envelope: np.ndarray

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.eps, axis=1)

    def __len__(self) -> int:
        return self.times.shape[0]


def _window(ts: TimeScale) -> TimeScale:
    return ts.windowed() if (ts.unbounded_tail or ts.horizon is not None) else ts


def delta_step(system: StabilitySystem, ts: TimeScale, t: float, eps: np.ndarray) -> np.ndarray:
    """``eps(sigma(t))`` from ``eps(t)`` at a right-scattered point."""
    m = mu(ts, t)
    if m <= 0:
        raise NotScattered(f"t={t!r} is right-dense")
    eps = np.asarray(eps, dtype=float)
    lead = system.lead_vector(t)
    g = system.gamma.value(t, m)
    return eps + m * (system.F.diff(t, eps + lead, lead) - g * (system.B @ eps))


def _step_for(run_length: float, h: float) -> float:
    return min(h, run_length / 8.0)


def _nsteps(length: float, step: float) -> int:
    if length <= 0:
        return 0
    return max(1, math.ceil(length / step - 1e-9))


def _rk4(system: StabilitySystem, t_start: float, t_end: float, eps: np.ndarray, nsteps: int) -> np.ndarray:
    f_code, f_a = system.F.kernel_code()
    g_code, g_params = system.gamma.kernel_code()
    lead = system.lead_vector(t_start)
    return kernels.rk4_fixed(f_code, float(f_a), g_code, g_params, system.B, lead, float(t_start), float(t_end),
                             np.ascontiguousarray(eps, dtype=np.float64), int(nsteps))


def dense_integrate(system: StabilitySystem, t_start: float, t_end: float, eps: np.ndarray, h: float = DEFAULT_STEP,
                    ts: TimeScale | None = None) -> np.ndarray:
    """RK4 across ``[t_start, t_end]`` with step ``min(h, (t_end - t_start) / 8)``.

    With ``ts`` the span is checked to lie inside one nondegenerate interval.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if t_end < t_start:
        raise NotDense(f"t_end={t_end!r} precedes t_start={t_start!r}")
    if ts is not None:
        pieces = dense_pieces(ts, t_start, t_end)
        covered = len(pieces) == 1 and pieces[0][0] <= t_start + TOL and pieces[0][1] >= t_end - TOL
        if t_end > t_start and not covered:
            raise NotDense(f"[{t_start!r}, {t_end!r}] is not inside one dense run")
    length = t_end - t_start
    if length == 0:
        return np.array(eps, dtype=float)
    return _rk4(system, t_start, t_end, eps, _nsteps(length, _step_for(length, h)))


def run(system: StabilitySystem, ts: TimeScale, h: float = DEFAULT_STEP, bc: BoundConstants | None = None,
        dense_samples: int = DEFAULT_DENSE_SAMPLES) -> Trajectory:
    """Simulate from ``T0`` to the window end.

    Samples: every interval endpoint (class ``B`` at decomposition boundaries,
    ``S`` at other right-scattered points) and ``dense_samples`` uniform pieces
    inside each dense run (class ``D``). The envelope column is NaN when M is
    not in (0, 1).
    """
    w = _window(ts)
    if system.t0 is not None and abs(system.t0 - w.t0) > TOL:
        raise ValueError(f"system t0={system.t0!r} differs from the scale start {w.t0!r}")
    decomp = decompose(w)
    if bc is None:
        bc = compute_bound_constants(eigendecompose(system.B), system.gamma, w, system.lip)
    table = EnvelopeTable(decomp, system.gamma, bc) if 0.0 < bc.m < 1.0 else None
    bset = set(decomp.finite_boundaries)

    times: list[float] = []
    classes: list[str] = []
    states: list[np.ndarray] = []

    def record(t, cls, eps):
        times.append(t)
        classes.append("B" if t in bset else cls)
        states.append(eps)

    eps = np.array(system.epsilon0, dtype=float)
    ivs = w.intervals
    last = len(ivs) - 1
    for k, (a, b) in enumerate(ivs):
        end_cls = "S" if (k < last or w.successor is not None) else "D"
        if b > a:
            record(a, "D", eps)
            step = _step_for(b - a, h)
            grid = np.linspace(a, b, dense_samples + 1)
            for lo, hi in zip(grid[:-1], grid[1:]):
                eps = _rk4(system, lo, hi, eps, _nsteps(hi - lo, step))
                record(float(hi), end_cls if hi == b else "D", eps)
        else:
            record(a, end_cls, eps)
        if k < last:
            eps = delta_step(system, w, b, eps)

    env = np.array([table(t) for t in times]) if table is not None else np.full(len(times), np.nan)
    return Trajectory(np.array(times), tuple(classes), np.array(states), env)


def empirical_c(traj: Trajectory, eps0_norm: float | None = None) -> float:
    """``max ||eps(t)|| / (||eps0|| * e_d(t, T0))`` over the samples; 0 for a zero start."""
    norms = traj.norms
    n0 = norms[0] if eps0_norm is None else eps0_norm
    if n0 == 0:
        return 0.0
    if np.any(~np.isfinite(traj.envelope)):
        return math.nan
    return float(np.max(norms / (n0 * traj.envelope)))


def write_csv(traj: Trajectory, stream) -> None:
    n = traj.eps.shape[1]
    stream.write(",".join(["t", "class", "eps_norm", "envelope"] + [f"eps_{i + 1}" for i in range(n)]) + "\n")
    norms = traj.norms
    for t, cls, nrm, env, row in zip(traj.times, traj.classes, norms, traj.envelope, traj.eps):
        fields = [format(float(t), ".17g"), cls, format(float(nrm), ".17g"), format(float(env), ".17g")]
        fields += [format(float(v), ".17g") for v in row]
        stream.write(",".join(fields) + "\n")


# ---------------------------------------------------------------------------
# variation-of-constants oracle


class _ModalSolver:
    """Sweeps the window once, carrying two eigenbasis states.

    ``y`` is the closed-form modal solution of ``y' = (c(t) - gamma(t) lambda) y``.
    ``z`` is built from the solution formula: the exponential of ``-gamma B``
    applied to ``eps0`` plus the delta-integral of
    ``e(t, sigma(tau)) c(tau) y(tau)``.
    """

    def __init__(self, system: StabilitySystem, ts: TimeScale, eig: EigenSystem, tol: float):
        self.F = system.F
        self.gamma = system.gamma
        self.lam = eig.lambdas
        self.tol = tol
        self.ts = ts

    def modal_y(self, y_u: np.ndarray, u: float, tau: float) -> np.ndarray:
        c_int = self.F.coefficient_integral(u, tau) if tau > u else 0.0
        g_int = self.gamma.dense_integral(u, tau)
        return y_u * np.exp(c_int - self.lam * g_int)

    def dense(self, z_u, y_u, u, v):
        if v <= u:
            return z_u, y_u
        lam, gamma, F = self.lam, self.gamma, self.F

        def integrand(tau):
            decay = np.exp(-lam * gamma.dense_integral(tau, v))
            return decay * F.coefficient(tau) * self.modal_y(y_u, u, tau)

        forced = adaptive_simpson(integrand, u, v, tol=self.tol)
        z_v = np.exp(-lam * gamma.dense_integral(u, v)) * z_u + forced
        return z_v, self.modal_y(y_u, u, v)

    def scattered(self, z, y, s, m):
        g = self.gamma.value(s, m)
        c = self.F.coefficient(s)
        return (1.0 - m * g * self.lam) * z + m * c * y, (1.0 + m * (c - g * self.lam)) * y


def variation_of_constants_path(system: StabilitySystem, ts: TimeScale, times, tol: float = 1e-9) -> np.ndarray:
    """Evaluate the solution formula at each of the ascending ``times``."""
    if not system.F.is_affine:
        raise UnsupportedDynamics(f"{system.F.kind} is not affine in x; the forcing term needs the unknown state")
    w = _window(ts)
    times = [float(t) for t in times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be ascending")
    for t in times:
        if t not in w:
            raise WindowError(f"t={t!r} is not a point of the window")
    eig = eigendecompose(system.B)
    U = eig.basis
    solver = _ModalSolver(system, w, eig, tol)
    z = U.T @ system.epsilon0
    y = z.copy()
    out = []
    qi = 0
    pts = dict(scattered_points(w))
    for k, (a, b) in enumerate(w.intervals):
        u = a
        while qi < len(times) and times[qi] <= b + TOL:
            q = min(max(times[qi], a), b)
            z, y = solver.dense(z, y, u, q)
            u = q
            out.append(U @ z)
            qi += 1
        if qi == len(times):
            break
        z, y = solver.dense(z, y, u, b)
        z, y = solver.scattered(z, y, b, pts[b])
    return np.array(out).reshape(len(times), system.n)


def variation_of_constants(system: StabilitySystem, ts: TimeScale, t: float, tol: float = 1e-9) -> np.ndarray:
    """``eps(t)`` from the solution formula, independently of :func:`run`."""
    return variation_of_constants_path(system, ts, [t], tol)[0]
