"""Finite-window checks of the exponential-stability sufficient conditions.

The certifier evaluates the standing hypotheses (sign of gamma*lambda,
graininess-gain window, Lipschitz bound) and then tries the routes in a fixed
cheapest-first order::

    ConstantGammaRemark -> Corollary1 -> SummableDenseGaps -> R6 -> R5 -> Theorem1

Asymptotic statements are replaced by explicit finite-window surrogates whose
thresholds live in :class:`CertifyConfig`:

* "tends to 0": the last ``tail_fraction`` of the samples is strictly
  decreasing and the final sample is below ``decay_factor`` times the first;
* "stays finite": the tail is nonincreasing, or its maximum is at most
  ``bounded_factor`` times its median;
* "series converges": no terms, or the log-log slope of the terms against
  their index over the last half is below ``-series_exponent``.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    BoundConstants,
    EigenSystem,
    GammaSpec,
    compute_bound_constants,
    eigendecompose,
    graininess_gain_products,
    graininess_gain_witness,
    spectrum_sign_witness,
)
from .system import DynamicsSpec, StabilitySystem, TrajectorySpec
from .timescale import SegmentDecomposition, TimeScale, decompose, scattered_points

__all__ = [
    "Certificate",
    "CertifyConfig",
    "ConditionResult",
    "DynamicsSpec",
    "EnvelopeTable",
    "StabilitySystem",
    "TrajectorySpec",
    "UnboundedSegmentError",
    "certify",
    "check_graininess_gain",
    "check_spectrum_sign",
    "compute_sum_i",
    "envelope",
    "estimate_lipschitz",
]

ROUTES = ("ConstantGammaRemark", "Corollary1", "SummableDenseGaps", "R6", "R5", "Theorem1")

STABLE = "ExponentiallyStable"
INCONCLUSIVE = "Inconclusive"


class UnboundedSegmentError(ValueError):
    pass


@dataclass
class CertifyConfig:
    dense_samples: int = 512
    decay_factor: float = 1e-3
    tail_fraction: float = 0.25
    bounded_factor: float = 10.0
    series_exponent: float = 1.05
    lipschitz_samples: int = 10_000
    lipschitz_slack: float = 0.01
    # "enforce": failed hypotheses end in Inconclusive.
    # "as_published": they are reported but do not gate the routes.
    prerequisites: str = "enforce"
    # optional overrides: delta | m_star, mu_star
    stated: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.prerequisites not in ("enforce", "as_published"):
            raise ValueError(f"prerequisites must be 'enforce' or 'as_published', got {self.prerequisites!r}")
        unknown = set(self.stated) - {"delta", "m_star", "mu_star"}
        if unknown:
            raise ValueError(f"unknown stated constants {sorted(unknown)}")


@dataclass
class ConditionResult:
    name: str
    passed: bool
    witness: object = None

    def to_dict(self) -> dict:
        return {"name": self.name, "pass": self.passed, "witness": self.witness}


@dataclass
class RouteResult:
    route: str
    passed: bool
    conditions: list[ConditionResult]

    @property
    def reasons(self) -> list[str]:
        return [f"{c.name}: {c.witness}" for c in self.conditions if not c.passed]


# ---------------------------------------------------------------------------
# standing hypotheses


def check_spectrum_sign(eig: EigenSystem, gamma: GammaSpec, ts: TimeScale, samples: int = 512) -> ConditionResult:
    """gamma(t)*lambda_i > 0 at every scattered point and on a dense grid."""
    w = spectrum_sign_witness(eig, gamma, ts, samples)
    return ConditionResult("(3) gamma*lambda_i > 0", w is None, w)


def check_graininess_gain(eig: EigenSystem, gamma: GammaSpec, ts: TimeScale):
    """0 < mu*gamma*lambda_i < 1 at every scattered point, for every i.

    Returns the condition result and the window delta, the minimum of
    mu*gamma*lambda over points and eigenvalues (None when the window has no
    scattered point).
    """
    prods = graininess_gain_products(eig, gamma, ts)
    delta = min((float(p.min()) for _, _, p in prods), default=None)
    if not prods:
        return ConditionResult("(4) 0 < mu*gamma*lambda_i < 1", True, "vacuous: no scattered point in window"), None
    w = graininess_gain_witness(eig, gamma, ts)
    return ConditionResult("(4) 0 < mu*gamma*lambda_i < 1", w is None, w), delta


def estimate_lipschitz(F: DynamicsSpec, n: int, t_lo: float, t_hi: float, samples: int = 10_000,
                       seed: int = 0) -> float:
    """Largest observed ``|F(t,x) - F(t,y)| / |x - y|`` over random pairs."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(t_lo, t_hi, samples)
    x = rng.normal(scale=2.0, size=(samples, n))
    step = rng.normal(size=(samples, n))
    # half of the pairs are close, where a sine field is steepest
    step[: samples // 2] *= 1e-4
    y = x + step
    num = np.linalg.norm(F.batch(t, x) - F.batch(t, y), axis=1)
    den = np.linalg.norm(x - y, axis=1)
    return float(np.max(num / den))


# ---------------------------------------------------------------------------
# sum(i) and the envelope


def compute_sum_i(decomp: SegmentDecomposition, gamma: GammaSpec, bc: BoundConstants, i: int,
                  clip: bool = True) -> float:
    """``sum_{j<=i} (L/M * |dense run j| + ln M * integral of |gamma| over run j)``.

    Runs ending at an infinite or truncated boundary are clipped at the window
    end when ``clip`` is set; otherwise :class:`UnboundedSegmentError`.
    """
    if i < 0:
        raise ValueError("i must be nonnegative")
    runs = decomp.dense_runs()[:i]
    if not clip and runs:
        hi = decomp.boundary(2 * len(runs))
        if not hi.is_finite:
            raise UnboundedSegmentError(f"dense run {len(runs)} ends at {hi}")
    rate = bc.lip / bc.m
    ln_m = math.log(bc.m)
    return sum(rate * (hi - lo) + ln_m * gamma.dense_abs_integral(lo, hi) for lo, hi in runs)


class EnvelopeTable:
    """Precomputed pieces of the decay envelope ``e_d(t, T0)``.

    On a scattered segment: ``exp(sum(i)) * (M + mu* L)^(points in [T0, t))``.
    On dense run ``i+1`` starting at ``T``:
    ``exp(sum(i) + L/M (t - T) + ln M * int_T^t |gamma|) * (M + mu* L)^(points in [T0, T))``.
    """

    def __init__(self, decomp: SegmentDecomposition, gamma: GammaSpec, bc: BoundConstants):
        self.decomp = decomp
        self.gamma = gamma
        self.bc = bc
        self.factor = bc.m + bc.mu_star * bc.lip
        self.rate = bc.lip / bc.m
        self.ln_m = math.log(bc.m)
        self.t0 = decomp.boundaries[0].value
        self.runs = decomp.dense_runs()
        self.sums = [0.0]
        for lo, hi in self.runs:
            self.sums.append(self.sums[-1] + self.rate * (hi - lo) + self.ln_m * gamma.dense_abs_integral(lo, hi))
        self.points = [t for grp in decomp.scattered_points for t, _ in grp]

    def _count_before(self, t: float) -> int:
        return bisect.bisect_left(self.points, t - 1e-12)

    def log_value(self, t: float) -> float:
        if t <= self.t0:
            return 0.0
        j = self.decomp.segment_of(t)
        i = j // 2
        log_f = math.log(self.factor)
        if j % 2 == 0:
            return self.sums[i] + log_f * self._count_before(t)
        start = self.decomp.boundaries[j].value
        part = self.rate * (t - start) + self.ln_m * self.gamma.dense_abs_integral(start, t)
        return self.sums[i] + part + log_f * self._count_before(start)

    def __call__(self, t: float) -> float:
        return math.exp(self.log_value(t))


def envelope(decomp: SegmentDecomposition, gamma: GammaSpec, bc: BoundConstants, t: float) -> float:
    """``e_d(t, T0)``; see :class:`EnvelopeTable`."""
    return EnvelopeTable(decomp, gamma, bc)(t)


# ---------------------------------------------------------------------------
# finite-window surrogates


def _tail(seq, fraction):
    k = max(2, math.ceil(len(seq) * fraction))
    return seq[-k:]


def tends_to_zero(seq, cfg: CertifyConfig):
    if len(seq) < 2:
        return False, "fewer than two samples"
    tail = _tail(seq, cfg.tail_fraction)
    if not all(b < a for a, b in zip(tail, tail[1:])):
        return False, "not strictly decreasing over the final quarter"
    if not seq[-1] < cfg.decay_factor * seq[0]:
        return False, f"final/initial = {seq[-1] / seq[0]:.6g} >= {cfg.decay_factor:g}"
    return True, f"final/initial = {seq[-1] / seq[0]:.6g}"


def stays_finite(seq, cfg: CertifyConfig):
    if not seq:
        return True, "vacuous: empty sequence"
    if not all(math.isfinite(v) for v in seq):
        return False, "non-finite value"
    tail = seq[-max(1, math.ceil(len(seq) * cfg.tail_fraction)):]
    if all(b <= a for a, b in zip(tail, tail[1:])):
        return True, "nonincreasing over the final quarter"
    med = float(np.median(tail))
    if max(tail) <= cfg.bounded_factor * med:
        return True, f"max {max(tail):.6g} <= {cfg.bounded_factor:g} x median {med:.6g}"
    return False, f"max {max(tail):.6g} > {cfg.bounded_factor:g} x median {med:.6g}"


def series_converges(terms, cfg: CertifyConfig):
    terms = [abs(v) for v in terms]
    if not terms:
        return True, "vacuous: no terms"
    if len(terms) < 4:
        return False, f"only {len(terms)} terms, too few to judge"
    k = np.arange(1, len(terms) + 1, dtype=float)
    half = len(terms) // 2
    kk, tt = k[half:], np.asarray(terms[half:])
    if np.any(tt <= 0):
        tt = np.where(tt <= 0, np.finfo(float).tiny, tt)
    slope = float(np.polyfit(np.log(kk), np.log(tt), 1)[0])
    ok = slope < -cfg.series_exponent
    return ok, f"log-log slope of terms {slope:.4g} (need < {-cfg.series_exponent:g})"


# ---------------------------------------------------------------------------
# asymptotic shape of the point sets


def _late_window(ts: TimeScale, fraction: float) -> float:
    return ts.end - fraction * (ts.end - ts.t0)


def _has_scattered_after(ts: TimeScale, t: float) -> bool:
    return any(s >= t for s, _ in scattered_points(ts))


def _has_dense_after(ts: TimeScale, t: float) -> bool:
    return any(b > max(a, t) for a, b in ts.intervals)


def scattered_unbounded(ts: TimeScale, cfg: CertifyConfig):
    c = ts.continuation
    if c is not None:
        return c in ("scattered", "mixed"), f"from the scale description ({c} continuation)"
    ok = _has_scattered_after(ts, _late_window(ts, cfg.tail_fraction))
    return ok, "judged on the truncated window"


def dense_unbounded(ts: TimeScale, cfg: CertifyConfig):
    c = ts.continuation
    if c is not None:
        return c in ("dense", "mixed"), f"from the scale description ({c} continuation)"
    ok = _has_dense_after(ts, _late_window(ts, cfg.tail_fraction))
    return ok, "judged on the truncated window"


# ---------------------------------------------------------------------------
# certificate


@dataclass
class Certificate:
    verdict: str
    route: str | None
    constants: BoundConstants
    computed_constants: BoundConstants
    conditions: list[ConditionResult]
    routes: list[RouteResult]
    sum_samples: list[tuple[int, float]]
    envelope_samples: list[tuple[float, float]]
    boundaries: list[str]
    caveats: list[str] = field(default_factory=list)
    reasons: list[str] = field(default_factory=list)
    rate: float | None = None

    @property
    def stable(self) -> bool:
        return self.verdict == STABLE

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "route": self.route,
            "constants": self.constants.to_dict(),
            "computed_constants": self.computed_constants.to_dict(),
            "constant_gamma_rate": self.rate,
            "conditions": [c.to_dict() for c in self.conditions],
            "routes": [
                {"route": r.route, "pass": r.passed, "conditions": [c.to_dict() for c in r.conditions]}
                for r in self.routes
            ],
            "sum_samples": [[i, v] for i, v in self.sum_samples],
            "envelope_samples": [[t, v] for t, v in self.envelope_samples],
            "boundaries": self.boundaries,
            "caveats": self.caveats,
            "reasons": self.reasons,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        c = self.constants
        lines = [f"verdict: {self.verdict}" + (f" via {self.route}" if self.route else "")]
        lines.append("boundaries: " + " ".join(f"T{j}={b}" for j, b in enumerate(self.boundaries)))
        lines.append(
            "constants: "
            + " ".join(f"{k}={_fmt(v)}" for k, v in c.to_dict().items())
            + f" M+mu*L={_fmt(c.m + c.mu_star * c.lip)}"
        )
        cc = self.computed_constants
        if cc != c:
            lines.append("computed:  " + " ".join(f"{k}={_fmt(v)}" for k, v in cc.to_dict().items()))
        if self.rate is not None:
            lines.append(f"constant-gain rate L/M + gamma ln M = {self.rate:.6g}")
        lines.append("hypotheses:")
        for cond in self.conditions:
            lines.append(f"  [{'pass' if cond.passed else 'FAIL'}] {cond.name}" + _wit(cond))
        lines.append("routes:")
        for r in self.routes:
            lines.append(f"  {r.route}: {'pass' if r.passed else 'fail'}")
            for cond in r.conditions:
                lines.append(f"    [{'pass' if cond.passed else 'FAIL'}] {cond.name}" + _wit(cond))
        for note in self.caveats:
            lines.append(f"caveat: {note}")
        for note in self.reasons:
            lines.append(f"reason: {note}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return "None" if v is None else format(v, ".6g")


def _wit(cond: ConditionResult) -> str:
    return "" if cond.witness is None else f"  ({cond.witness})"


def _checkpoints(ts: TimeScale, decomp: SegmentDecomposition) -> list[float]:
    pts = {ts.t0, ts.end}
    pts.update(b for b in decomp.finite_boundaries if b <= ts.end)
    pts.update(t for t, _ in scattered_points(ts))
    return sorted(pts)


def certify(system: StabilitySystem, ts: TimeScale, config: CertifyConfig | None = None) -> Certificate:
    """Evaluate every route on the window of ``ts`` and return the first that passes."""
    cfg = config or CertifyConfig()
    w = ts.windowed() if (ts.unbounded_tail or ts.horizon is not None) else ts
    eig = eigendecompose(system.B)
    gamma = system.gamma
    decomp = decompose(w)
    computed = compute_bound_constants(eig, gamma, w, system.lip)
    bc = compute_bound_constants(eig, gamma, w, system.lip, **cfg.stated) if cfg.stated else computed

    caveats: list[str] = []
    for key in ("m_star", "mu_star", "delta"):
        if key in cfg.stated:
            got, mine = getattr(bc, key), getattr(computed, key)
            caveats.append(f"stated {key}={_fmt(got)} used in place of the window value {_fmt(mine)}")

    c3 = check_spectrum_sign(eig, gamma, w, cfg.dense_samples)
    c4, _ = check_graininess_gain(eig, gamma, w)
    w_min = graininess_gain_witness(eig, gamma, w, lambdas=[int(np.argmin(np.abs(eig.lambdas)))])
    c4min = ConditionResult("(4) restricted to the smallest |lambda|", w_min is None, w_min)
    c_mu = ConditionResult(
        "(C2e1) mu(t) <= mu*",
        bc.mu_star >= computed.mu_star - 1e-12,
        None if bc.mu_star >= computed.mu_star - 1e-12 else f"window sup mu = {computed.mu_star:.6g} > mu* = {bc.mu_star:.6g}",
    )
    c_m = ConditionResult("M in (0, 1)", 0.0 < bc.m < 1.0, None if 0.0 < bc.m < 1.0 else f"M = {bc.m!r}")
    t_hi = w.end if math.isfinite(w.end) else w.t0 + 1.0
    lip_est = estimate_lipschitz(system.F, system.n, max(w.t0, 1e-9), max(t_hi, w.t0 + 1e-9), cfg.lipschitz_samples)
    c_lip = ConditionResult(
        "(Lip) sampled Lipschitz ratio <= L",
        lip_est <= system.lip * (1.0 + cfg.lipschitz_slack) + 1e-15,
        f"sampled max ratio {lip_est:.6g}, L = {system.lip:.6g}",
    )
    conditions = [c3, c4, c4min, c_mu, c_m, c_lip]

    runs = decomp.dense_runs()
    sums = [compute_sum_i(decomp, gamma, bc, i) for i in range(1, len(runs) + 1)] if c_m.passed else []
    sum_samples = list(enumerate(sums, start=1))
    boundaries = [str(b) for b in decomp.boundaries]

    if not c_m.passed:
        return Certificate(INCONCLUSIVE, None, bc, computed, conditions, [], [], [], boundaries, caveats,
                           [f"M = {bc.m!r} is not in (0, 1)"])

    table = EnvelopeTable(decomp, gamma, bc)
    env_samples = [(t, table(t)) for t in _checkpoints(w, decomp)]

    failed = [c for c in (c3, c4, c_mu, c_lip) if not c.passed]
    if failed and cfg.prerequisites == "enforce":
        return Certificate(INCONCLUSIVE, None, bc, computed, conditions, [], sum_samples, env_samples,
                           boundaries, caveats, [f"hypothesis failed: {c.name} ({c.witness})" for c in failed])
    for c in failed:
        caveats.append(f"hypothesis {c.name} fails on the window ({c.witness}); reported, not enforced")

    factor = bc.m + bc.mu_star * bc.lip
    e1 = ConditionResult("(e1) M + mu* L < 1", factor < 1.0, f"M + mu* L = {factor:.6g}")
    rate = None
    gconst = gamma.constant_value()
    if gconst is not None:
        rate = bc.lip / bc.m + gconst * math.log(bc.m)

    routes = [
        _route_constant_gamma(gconst, rate, e1),
        _route_corollary1(w, sums, e1, cfg),
        _route_summable_gaps(w, decomp, e1, cfg),
        _route_r6(w, sums, cfg),
        _route_r5(w, decomp, gamma, bc, cfg),
        _route_theorem1(env_samples, cfg),
    ]
    winner = next((r for r in routes if r.passed), None)
    if winner is None:
        reasons = [f"{r.route}: " + "; ".join(r.reasons) for r in routes]
        return Certificate(INCONCLUSIVE, None, bc, computed, conditions, routes, sum_samples, env_samples,
                           boundaries, caveats, reasons, rate)
    return Certificate(STABLE, winner.route, bc, computed, conditions, routes, sum_samples, env_samples,
                       boundaries, caveats, [], rate)


def _route_constant_gamma(gconst, rate, e1) -> RouteResult:
    es71 = ConditionResult("(es71) gamma constant", gconst is not None, None if gconst is not None else "gamma varies")
    if rate is None:
        es72 = ConditionResult("(es72) L/M + gamma ln M < 0", False, "needs constant gamma")
    else:
        es72 = ConditionResult("(es72) L/M + gamma ln M < 0", rate < 0, f"rate = {rate:.6g}")
    conds = [es71, es72, e1]
    return RouteResult("ConstantGammaRemark", all(c.passed for c in conds), conds)


def _route_corollary1(ts, sums, e1, cfg) -> RouteResult:
    s_ok, s_note = scattered_unbounded(ts, cfg)
    d_ok, d_note = dense_unbounded(ts, cfg)
    e100 = ConditionResult("(e100) both point types unbounded", s_ok and d_ok,
                           f"scattered unbounded={s_ok}, dense unbounded={d_ok}; {s_note}")
    ok, note = stays_finite([math.exp(s) for s in sums], cfg)
    e7 = ConditionResult("(e_7) lim e^sum(i) < inf", ok, note)
    conds = [e100, e1, e7]
    return RouteResult("Corollary1", all(c.passed for c in conds), conds)


def _route_summable_gaps(ts, decomp, e1, cfg) -> RouteResult:
    c = ts.continuation
    if c == "dense":
        es7 = ConditionResult("(es7) sum of dense-run lengths < inf", False, "last dense run is unbounded")
    elif c == "scattered":
        es7 = ConditionResult("(es7) sum of dense-run lengths < inf", True, "dense points are bounded")
    else:
        ok, note = series_converges([hi - lo for lo, hi in decomp.dense_runs()], cfg)
        es7 = ConditionResult("(es7) sum of dense-run lengths < inf", ok, note)
    s_ok, s_note = scattered_unbounded(ts, cfg)
    inf_s = ConditionResult("scattered points infinite", s_ok, s_note)
    conds = [es7, e1, inf_s]
    return RouteResult("SummableDenseGaps", all(x.passed for x in conds), conds)


def _route_r6(ts, sums, cfg) -> RouteResult:
    s_ok, s_note = scattered_unbounded(ts, cfg)
    finite = ConditionResult("scattered points finite", not s_ok, s_note)
    neg = bool(sums) and all(s < 0 for s in sums)
    worst = max(sums) if sums else None
    sum_neg = ConditionResult("sum(i) < 0 for every i", neg,
                              "no dense run in window" if not sums else f"max sum(i) = {worst:.6g}")
    conds = [finite, sum_neg]
    return RouteResult("R6", all(c.passed for c in conds), conds)


def _route_r5(ts, decomp, gamma, bc, cfg) -> RouteResult:
    runs = decomp.dense_runs()
    if ts.continuation == "dense":
        gsum = ConditionResult("sum of int |gamma| over dense runs < inf", False, "last dense run is unbounded")
    elif ts.continuation == "scattered":
        gsum = ConditionResult("sum of int |gamma| over dense runs < inf", True, "dense points are bounded")
    else:
        ok, note = series_converges([gamma.dense_abs_integral(lo, hi) for lo, hi in runs], cfg)
        gsum = ConditionResult("sum of int |gamma| over dense runs < inf", ok, note)
    # e^{L/M sum_{j<=i} len_j} * prod over [T0, T_{2i}) of (M + mu* L), i = 1..
    rate = bc.lip / bc.m
    factor = bc.m + bc.mu_star * bc.lip
    points = [t for grp in decomp.scattered_points for t, _ in grp]
    seq = []
    acc = 0.0
    for i, (lo, hi) in enumerate(runs, start=1):
        acc += hi - lo
        t2i = decomp.boundary(2 * i)
        end = t2i.value if t2i.is_finite else math.inf
        count = bisect.bisect_left(points, end - 1e-12)
        seq.append(math.exp(rate * acc) * factor**count)
    ok, note = tends_to_zero(seq, cfg)
    lim = ConditionResult("e^(L/M sum len) * prod (M + mu* L) -> 0", ok, note)
    conds = [gsum, lim]
    return RouteResult("R5", all(c.passed for c in conds), conds)


def _route_theorem1(env_samples, cfg) -> RouteResult:
    ts_ = np.array([t for t, _ in env_samples])
    vals = [v for _, v in env_samples]
    if len(vals) >= 2 and all(v > 0 for v in vals):
        slope = float(np.polyfit(ts_, np.log(vals), 1)[0])
    else:
        slope = math.nan
    fit = ConditionResult("log e_d(t) has negative trend", slope < 0, f"log-linear slope {slope:.6g}")
    ok, note = tends_to_zero(vals, cfg)
    lim = ConditionResult("(e_11)/(e_21) e_d(t, T0) -> 0", ok, note)
    conds = [fit, lim]
    return RouteResult("Theorem1", all(c.passed for c in conds), conds)
