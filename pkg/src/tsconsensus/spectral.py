"""Eigendecomposition of B, the time-scale exponential of -gamma*B, and its norm bounds.

Every matrix built here is a function of the symmetric coupling matrix ``B``,
so all of them share its eigenbasis. The exponential is therefore evaluated
mode by mode::

    d_i(t, t0) = prod_{s scattered in [t0, t)} (1 - mu(s) gamma(s) lambda_i)
                 * exp(-lambda_i * integral of gamma over the dense part of [t0, t])

and reassembled as ``U diag(d) U^T``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from . import kernels
from .timescale import (
    SegmentDecomposition,
    TimeScale,
    WindowError,
    dense_pieces,
    decompose,
    scattered_points,
    scattered_points_in,
)

REGRESSIVE_TOL = 1e-14


class NotSymmetricError(ValueError):
    pass


class NoConvergenceError(RuntimeError):
    pass


class NonRegressiveError(ArithmeticError):
    pass


class ConditionsViolated(ValueError):
    """Raised when the sign or graininess-gain hypotheses fail.

    ``witness`` carries the offending time, eigenvalue index and value.
    """

    def __init__(self, message: str, witness: dict | None = None):
        super().__init__(message)
        self.witness = witness or {}


def as_symmetric(B) -> np.ndarray:
    a = np.array(B, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise NotSymmetricError(f"B must be a nonempty square matrix, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        i, j = np.argwhere(a != a.T)[0]
        raise NotSymmetricError(f"B[{i}][{j}]={a[i, j]!r} differs from B[{j}][{i}]={a[j, i]!r}")
    return a


@dataclass(frozen=True, eq=False)
class EigenSystem:
    lambdas: np.ndarray
    basis: np.ndarray
    sweeps: int = 0

    @property
    def n(self) -> int:
        return self.lambdas.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(self.lambdas[0])

    @property
    def lambda_max(self) -> float:
        return float(self.lambdas[-1])

    def compose(self, d: np.ndarray) -> np.ndarray:
        """``U diag(d) U^T``."""
        return (self.basis * d) @ self.basis.T


def eigendecompose(B, tol: float = 1e-12, max_sweeps: int = kernels.MAX_SWEEPS) -> EigenSystem:
    """Cyclic Jacobi eigendecomposition with row-major sweep order.

    Stops once the off-diagonal Frobenius norm falls below ``tol * ||B||_F``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = as_symmetric(B)
    w, v, sweeps = kernels.jacobi_eigh(a, tol, max_sweeps)
    if sweeps < 0:
        raise NoConvergenceError(f"Jacobi rotations did not converge in {max_sweeps} sweeps")
    order = np.argsort(w, kind="stable")
    return EigenSystem(np.ascontiguousarray(w[order]), np.ascontiguousarray(v[:, order]), sweeps)


# ---------------------------------------------------------------------------
# feedback gain


@dataclass(frozen=True)
class GammaSpec:
    """Feedback gain gamma(t).

    Kinds: ``constant`` (c), ``polynomial`` (ascending coefficients in t),
    ``cosine`` (offset + amplitude*cos t), ``inverse_graininess`` (1/mu(t),
    scattered points only) and ``per_branch`` (separate gains on scattered
    points and dense runs).
    """

    kind: str
    params: tuple[float, ...] = ()
    scattered: "GammaSpec | None" = None
    dense: "GammaSpec | None" = None

    @classmethod
    def constant(cls, c: float) -> "GammaSpec":
        return cls("constant", (float(c),))

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "GammaSpec":
        return cls("polynomial", tuple(float(c) for c in coeffs))

    @classmethod
    def cosine(cls, offset: float, amplitude: float) -> "GammaSpec":
        return cls("cosine", (float(offset), float(amplitude)))

    @classmethod
    def inverse_graininess(cls) -> "GammaSpec":
        return cls("inverse_graininess")

    @classmethod
    def per_branch(cls, scattered: "GammaSpec", dense: "GammaSpec") -> "GammaSpec":
        return cls("per_branch", (), scattered, dense)

    def value(self, t: float, mu: float = 0.0) -> float:
        """gamma at ``t``; ``mu > 0`` selects the scattered branch."""
        k = self.kind
        if k == "constant":
            return self.params[0]
        if k == "polynomial":
            return float(P.polyval(t, self.params))
        if k == "cosine":
            return self.params[0] + self.params[1] * math.cos(t)
        if k == "inverse_graininess":
            if mu <= 0:
                raise ValueError(f"1/mu is undefined at the right-dense point t={t!r}")
            return 1.0 / mu
        if k == "per_branch":
            return (self.scattered if mu > 0 else self.dense).value(t, mu)
        raise ValueError(f"unknown gamma kind {k!r}")

    def constant_value(self) -> float | None:
        """The constant, if gamma is the same number everywhere."""
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "polynomial" and all(c == 0 for c in self.params[1:]):
            return self.params[0] if self.params else 0.0
        if self.kind == "cosine" and self.params[1] == 0:
            return self.params[0]
        if self.kind == "per_branch":
            a, b = self.scattered.constant_value(), self.dense.constant_value()
            if a is not None and a == b:
                return a
        return None

    @functools.cached_property
    def _antiderivative(self) -> np.ndarray:
        return P.polyint(self.params)

    @functools.cached_property
    def _real_roots(self) -> tuple[float, ...]:
        coeffs = np.trim_zeros(np.asarray(self.params, dtype=float), "b")
        if coeffs.size <= 1:
            return ()
        return tuple(sorted(float(x.real) for x in P.polyroots(coeffs) if abs(x.imag) < 1e-12))

    def dense_values(self, t: np.ndarray) -> np.ndarray:
        """gamma on right-dense points, vectorised over ``t``."""
        g = self._dense()
        t = np.asarray(t, dtype=float)
        if g.kind == "constant":
            return np.full(t.shape, g.params[0])
        if g.kind == "polynomial":
            return P.polyval(t, g.params)
        return g.params[0] + g.params[1] * np.cos(t)

    def _dense(self) -> "GammaSpec":
        if self.kind == "per_branch":
            return self.dense._dense()
        if self.kind == "inverse_graininess":
            raise ValueError("1/mu has no value on right-dense runs")
        return self

    def dense_integral(self, a: float, b: float) -> float:
        """Exact integral of gamma over ``[a, b]`` on a dense run."""
        if b <= a:
            return 0.0
        g = self._dense()
        if g.kind == "constant":
            return g.params[0] * (b - a)
        if g.kind == "polynomial":
            anti = g._antiderivative
            return float(P.polyval(b, anti) - P.polyval(a, anti))
        o, amp = g.params
        return o * (b - a) + amp * (math.sin(b) - math.sin(a))

    def _dense_roots(self, a: float, b: float) -> list[float]:
        g = self._dense()
        if g.kind == "constant":
            return []
        if g.kind == "polynomial":
            return [x for x in g._real_roots if a < x < b]
        o, amp = g.params
        if amp == 0 or abs(o) >= abs(amp):
            return []
        base = math.acos(-o / amp)
        two_pi = 2 * math.pi
        out = []
        for root in (base, -base):
            k = math.ceil((a - root) / two_pi)
            x = root + k * two_pi
            while x < b:
                if x > a:
                    out.append(x)
                x += two_pi
        return sorted(out)

    def dense_abs_integral(self, a: float, b: float) -> float:
        """Integral of |gamma| over ``[a, b]``, split at sign changes."""
        if b <= a:
            return 0.0
        cuts = [a] + self._dense_roots(a, b) + [b]
        return sum(abs(self.dense_integral(lo, hi)) for lo, hi in zip(cuts, cuts[1:]))

    def kernel_code(self) -> tuple[int, np.ndarray]:
        g = self._dense()
        if g.kind == "cosine":
            return kernels.G_COSINE, np.array(g.params, dtype=np.float64)
        return kernels.G_POLY, np.array(g.params or (0.0,), dtype=np.float64)

    def to_dict(self) -> dict:
        k = self.kind
        if k == "constant":
            return {"kind": k, "value": self.params[0]}
        if k == "polynomial":
            return {"kind": k, "coeffs": list(self.params)}
        if k == "cosine":
            return {"kind": k, "offset": self.params[0], "amplitude": self.params[1]}
        if k == "inverse_graininess":
            return {"kind": k}
        return {"kind": k, "scattered": self.scattered.to_dict(), "dense": self.dense.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "GammaSpec":
        k = d["kind"]
        if k == "constant":
            return cls.constant(d["value"])
        if k == "polynomial":
            return cls.polynomial(d["coeffs"])
        if k == "cosine":
            return cls.cosine(d["offset"], d["amplitude"])
        if k == "inverse_graininess":
            return cls.inverse_graininess()
        if k == "per_branch":
            return cls.per_branch(cls.from_dict(d["scattered"]), cls.from_dict(d["dense"]))
        raise ValueError(f"unknown gamma kind {k!r}")


# ---------------------------------------------------------------------------
# bound constants


@dataclass(frozen=True)
class BoundConstants:
    delta: float | None
    m_star: float | None
    m_star_star: float
    m: float
    mu_star: float
    lip: float

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "m": self.m,
            "m_star": self.m_star,
            "m_star_star": self.m_star_star,
            "mu_star": self.mu_star,
            "lip": self.lip,
        }


def graininess_gain_products(eig: EigenSystem, gamma: GammaSpec, ts: TimeScale):
    """``(t, mu, mu*gamma*lambda_i for all i)`` at every scattered point of the window."""
    out = []
    for t, m in scattered_points(ts):
        g = gamma.value(t, m)
        out.append((t, m, m * g * eig.lambdas))
    return out


def compute_bound_constants(
    eig: EigenSystem,
    gamma: GammaSpec,
    ts: TimeScale,
    lip: float,
    *,
    delta: float | None = None,
    m_star: float | None = None,
    mu_star: float | None = None,
) -> BoundConstants:
    """delta, M*, M**, M and mu* for a windowed scale.

    delta is the window minimum of mu*gamma*lambda over scattered points and
    eigenvalues; mu* the window supremum of mu. ``M** = exp(-min|lambda_i|)``,
    which is the exact norm of ``exp(-B)`` for a one-signed spectrum.
    Keyword arguments override the computed values.
    """
    prods = graininess_gain_products(eig, gamma, ts)
    if delta is None and m_star is None and prods:
        delta = float(min(p.min() for _, _, p in prods))
    if m_star is not None:
        delta = 1.0 - m_star
    elif delta is not None:
        m_star = 1.0 - delta
    mss = math.exp(-float(np.min(np.abs(eig.lambdas))))
    m = mss if m_star is None else max(m_star, mss)
    if mu_star is None:
        mu_star = max((m for _, m, _ in prods), default=0.0)
    return BoundConstants(delta, m_star, mss, m, float(mu_star), float(lip))


# ---------------------------------------------------------------------------
# sign and graininess-gain hypotheses


def dense_sample_times(ts: TimeScale, samples: int = 512) -> list[float]:
    out = []
    for a, b in dense_pieces(ts, ts.t0, ts.end):
        out.extend(np.linspace(a, b, samples, endpoint=False).tolist())
    return out


def spectrum_sign_witness(eig: EigenSystem, gamma: GammaSpec, ts: TimeScale, samples: int = 512):
    """First sample where some gamma(t)*lambda_i is not positive, or None."""
    pts = scattered_points(ts)
    times = np.array([t for t, _ in pts] + dense_sample_times(ts, samples))
    if times.size == 0:
        return None
    g = np.empty(times.size)
    g[: len(pts)] = [gamma.value(t, m) for t, m in pts]
    if times.size > len(pts):
        g[len(pts):] = gamma.dense_values(times[len(pts):])
    bad = ~(g[:, None] * eig.lambdas[None, :] > 0)
    rows = np.flatnonzero(bad.any(axis=1))
    if rows.size == 0:
        return None
    r = rows[np.argmin(times[rows])]
    i = int(np.flatnonzero(bad[r])[0])
    t, gv = float(times[r]), float(g[r])
    return {"t": t, "index": i, "lambda": float(eig.lambdas[i]), "gamma": gv, "value": gv * float(eig.lambdas[i])}


def graininess_gain_witness(eig: EigenSystem, gamma: GammaSpec, ts: TimeScale, lambdas=None):
    """First scattered point where mu*gamma*lambda_i leaves (0, 1), or None.

    ``lambdas`` restricts the check to a subset of eigenvalue indices.
    """
    idx = np.arange(eig.n) if lambdas is None else np.asarray(lambdas)
    for t, m, prod in graininess_gain_products(eig, gamma, ts):
        p = prod[idx]
        bad = np.flatnonzero(~((p > 0) & (p < 1)))
        if bad.size:
            i = int(idx[bad[0]])
            return {"t": t, "mu": m, "index": i, "lambda": float(eig.lambdas[i]), "value": float(prod[i])}
    return None


@functools.lru_cache(maxsize=256)
def _conditions_cached(ts: TimeScale, gamma: GammaSpec, lambdas: tuple, samples: int):
    eig = EigenSystem(np.array(lambdas), np.eye(len(lambdas)))
    w = spectrum_sign_witness(eig, gamma, ts, samples)
    if w is not None:
        return "sign", w, None
    w = graininess_gain_witness(eig, gamma, ts)
    if w is not None:
        return "graininess", w, None
    prods = graininess_gain_products(eig, gamma, ts)
    true_delta = min((float(p.min()) for _, _, p in prods), default=None)
    return None, None, true_delta


def require_conditions(eig: EigenSystem, gamma: GammaSpec, ts: TimeScale, bc: BoundConstants | None = None,
                       samples: int = 512) -> None:
    """Raise :class:`ConditionsViolated` unless the sign and graininess-gain hypotheses hold.

    When ``bc`` is given, its M must also be a valid bound: at least
    ``1 - delta`` for the true window delta and at least ``M**``.
    """
    kind, w, true_delta = _conditions_cached(ts, gamma, tuple(eig.lambdas.tolist()), samples)
    if kind == "sign":
        raise ConditionsViolated(f"gamma(t)*lambda_{w['index']} = {w['value']:.6g} <= 0 at t={w['t']!r}", w)
    if kind == "graininess":
        raise ConditionsViolated(
            f"mu*gamma*lambda_{w['index']} = {w['value']:.6g} outside (0, 1) at t={w['t']!r}", w
        )
    if bc is not None:
        floor = math.exp(-float(np.min(np.abs(eig.lambdas))))
        if true_delta is not None:
            floor = max(floor, 1.0 - true_delta)
        if bc.m < floor - 1e-15:
            raise ConditionsViolated(f"M={bc.m!r} is below the admissible bound {floor!r}", {"m": bc.m, "floor": floor})


# ---------------------------------------------------------------------------
# exponentials


def modal_factors(ts: TimeScale, eig: EigenSystem, gamma: GammaSpec, t0: float, t: float) -> np.ndarray:
    """Eigenvalues ``d_i`` of ``e_{-gamma B}(t, t0)``."""
    if t < t0:
        raise WindowError(f"t={t!r} precedes t0={t0!r}")
    if t0 not in ts or t not in ts:
        raise WindowError(f"[{t0!r}, {t!r}] is not inside the time scale window")
    d = np.ones(eig.n)
    for s, m in scattered_points_in(ts, t0, t):
        f = 1.0 - m * gamma.value(s, m) * eig.lambdas
        bad = np.flatnonzero(np.abs(f) < REGRESSIVE_TOL)
        if bad.size:
            raise NonRegressiveError(
                f"1 - mu*gamma*lambda_{int(bad[0])} vanishes at t={s!r}; -gamma*B is not regressive there"
            )
        d *= f
    total = sum(gamma.dense_integral(a, b) for a, b in dense_pieces(ts, t0, t))
    if total:
        d *= np.exp(-eig.lambdas * total)
    return d


def ts_matrix_exponential(ts: TimeScale, eig: EigenSystem, gamma: GammaSpec, t0: float, t: float) -> np.ndarray:
    """``e_{-gamma B}(t, t0)`` as an n x n symmetric matrix."""
    if t == t0:
        if t0 not in ts:
            raise WindowError(f"t0={t0!r} is not a point of the time scale")
        return np.eye(eig.n)
    return eig.compose(modal_factors(ts, eig, gamma, t0, t))


def spectral_norm_exponential(ts: TimeScale, eig: EigenSystem, gamma: GammaSpec, t0: float, t: float) -> float:
    if t == t0:
        return 1.0
    return float(np.max(np.abs(modal_factors(ts, eig, gamma, t0, t))))


def scalar_ts_exponential(ts: TimeScale, p: float, t0: float, t: float) -> float:
    """Scalar ``e_p(t, t0)``: ``exp(p * dense length) * prod (1 + mu p)``."""
    if t < t0:
        raise WindowError(f"t={t!r} precedes t0={t0!r}")
    if t0 not in ts or t not in ts:
        raise WindowError(f"[{t0!r}, {t!r}] is not inside the time scale window")
    out = 1.0
    for _, m in scattered_points_in(ts, t0, t):
        f = 1.0 + m * p
        if abs(f) < REGRESSIVE_TOL:
            raise NonRegressiveError(f"1 + mu*p vanishes (mu={m!r}, p={p!r})")
        out *= f
    length = sum(b - a for a, b in dense_pieces(ts, t0, t))
    return out * math.exp(p * length)


# ---------------------------------------------------------------------------
# norm bounds


def _segment_span(decomp: SegmentDecomposition, j: int, ts: TimeScale) -> tuple[float, float]:
    lo = decomp.boundary(j)
    hi = decomp.boundary(j + 1)
    if not lo.is_finite:
        raise WindowError(f"segment {j} starts at {lo}")
    return lo.value, (hi.value if hi.is_finite else ts.end)


def lemma1_bounds(ts: TimeScale, decomp: SegmentDecomposition | None, eig: EigenSystem, gamma: GammaSpec,
                  bc: BoundConstants, segment_index: int, t: float, *, enforce: bool = True) -> float:
    """Per-segment bound on ``||e_{-gamma B}(t, T_j)||``.

    Scattered segments (even j): ``M ** (points passed)``. Dense runs (odd j):
    ``M ** integral |gamma|``. ``enforce=False`` skips the hypothesis check
    and evaluates the formula regardless.
    """
    if enforce:
        require_conditions(eig, gamma, ts, bc)
    decomp = decomp or decompose(ts)
    lo, hi = _segment_span(decomp, segment_index, ts)
    if not (lo - 1e-12 <= t <= hi + 1e-12):
        raise WindowError(f"t={t!r} is outside segment {segment_index} = [{lo!r}, {hi!r})")
    if segment_index % 2 == 0:
        return bc.m ** len(scattered_points_in(ts, lo, t))
    return bc.m ** gamma.dense_abs_integral(lo, t)


def lemma3_bound(ts: TimeScale, decomp: SegmentDecomposition | None, eig: EigenSystem, gamma: GammaSpec,
                 bc: BoundConstants, t: float, *, enforce: bool = True) -> float:
    """Whole-path bound on ``||e_{-gamma B}(t, T0)||``.

    On a scattered segment: ``M^(sum of completed dense-run integrals of |gamma|)``
    times ``M`` per scattered point in ``[T0, t)``. On a dense run the current
    run's partial integral joins the exponent and the product stops at the
    run start.
    """
    if enforce:
        require_conditions(eig, gamma, ts, bc)
    decomp = decomp or decompose(ts)
    t0 = decomp.boundaries[0].value
    if t == t0:
        return 1.0
    j = decomp.segment_of(t)
    i = j // 2
    exponent = 0.0
    for lo, hi in decomp.dense_runs()[:i]:
        exponent += gamma.dense_abs_integral(lo, hi)
    if j % 2 == 0:
        count = len(scattered_points_in(ts, t0, t))
    else:
        start = decomp.boundaries[j].value
        exponent += gamma.dense_abs_integral(start, t)
        count = len(scattered_points_in(ts, t0, start))
    return bc.m ** exponent * bc.m ** count
