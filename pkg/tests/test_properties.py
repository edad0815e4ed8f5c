"""Randomized invariants. ``CASES`` counts the examples each property actually ran."""

import collections
import json
import math

import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st

from oracles import expm_series
from tsconsensus.scenario import Scenario, parse_scenario
from tsconsensus.simulate import dense_integrate, run
from tsconsensus.spectral import (
    GammaSpec,
    compute_bound_constants,
    eigendecompose,
    lemma1_bounds,
    lemma3_bound,
    scalar_ts_exponential,
    spectral_norm_exponential,
    ts_matrix_exponential,
)
from tsconsensus.system import DynamicsSpec, StabilitySystem
from tsconsensus.timescale import (
    FamilySpec,
    PointClass,
    build_explicit,
    build_family,
    classify,
    decompose,
    mu,
    scattered_points,
    sigma,
)

CASES = collections.Counter()

positive = st.floats(0.05, 1.5, allow_nan=False)


@st.composite
def scales(draw, max_intervals=7, dense=True, scattered_only=False):
    n = draw(st.integers(2 if scattered_only else 1, max_intervals))
    t = draw(st.floats(0.0, 2.0))
    ivs = []
    for _ in range(n):
        if scattered_only or not dense:
            length = 0.0
        else:
            length = draw(st.one_of(st.just(0.0), st.floats(0.05, 2.0)))
        ivs.append((t, t + length))
        t = t + length + draw(positive)
    return build_explicit(ivs)


@st.composite
def spectra(draw, n_max=4, lo=0.1, hi=3.0):
    n = draw(st.integers(1, n_max))
    lams = draw(st.lists(st.floats(lo, hi), min_size=n, max_size=n))
    seed = draw(st.integers(0, 2**32 - 1))
    q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(n, n)))
    b = q @ np.diag(lams) @ q.T
    return (b + b.T) / 2


def _probe_points(ts):
    pts = []
    for a, b in ts.intervals:
        pts.append(a)
        if b > a:
            pts.extend([a + (b - a) / 3, (a + b) / 2, b])
    return sorted(set(pts))


@st.composite
def gains(draw, ceiling):
    """Positive gain with max value below ``ceiling``."""
    kind = draw(st.sampled_from(["constant", "cosine", "polynomial"]))
    top = ceiling * draw(st.floats(0.05, 0.95))
    if kind == "constant":
        return GammaSpec.constant(top)
    if kind == "cosine":
        amp = top * draw(st.floats(0.0, 0.45))
        return GammaSpec.cosine(top - amp, amp)
    return GammaSpec.polynomial([top])


@given(ts=scales(), b=spectra(), g=st.floats(0.1, 2.0), picks=st.lists(st.integers(0, 10**6), min_size=3, max_size=3))
def test_semigroup(ts, b, g, picks):
    eig = eigendecompose(b)
    gamma = GammaSpec.constant(g)
    for _, m in scattered_points(ts):
        assume(np.all(np.abs(1 - m * g * eig.lambdas) > 1e-6))
    pts = _probe_points(ts)
    t0, r, t = sorted(pts[p % len(pts)] for p in picks)
    whole = ts_matrix_exponential(ts, eig, gamma, t0, t)
    split = ts_matrix_exponential(ts, eig, gamma, r, t) @ ts_matrix_exponential(ts, eig, gamma, t0, r)
    assert np.max(np.abs(whole - split)) <= 1e-9 * max(1.0, np.max(np.abs(whole)))
    assert np.array_equal(ts_matrix_exponential(ts, eig, gamma, t0, t0), np.eye(eig.n))
    CASES["semigroup"] += 1


@given(ts=scales(), b=spectra(), data=st.data())
def test_lemma_dominance(ts, b, data):
    eig = eigendecompose(b)
    mu_max = max((m for _, m in scattered_points(ts)), default=1.0)
    gamma = data.draw(gains(1.0 / (mu_max * float(np.max(eig.lambdas)))))
    bc = compute_bound_constants(eig, gamma, ts, 0.0)
    assert 0 < bc.m < 1
    decomp = decompose(ts)
    t0 = ts.t0
    pts = _probe_points(ts)
    for t in pts:
        exact = spectral_norm_exponential(ts, eig, gamma, t0, t)
        assert exact <= lemma3_bound(ts, decomp, eig, gamma, bc, t) * (1 + 1e-12) + 1e-15
    for j, lo in enumerate(decomp.boundaries):
        if not lo.is_finite:
            break
        hi = decomp.boundary(j + 1)
        hi_v = hi.value if hi.is_finite else ts.end
        for t in (p for p in pts if lo.value <= p <= hi_v):
            if j % 2 == 0 and t == hi_v and hi.is_finite and t != lo.value:
                continue
            bound = lemma1_bounds(ts, decomp, eig, gamma, bc, j, t)
            exact = spectral_norm_exponential(ts, eig, gamma, lo.value, t)
            assert exact <= bound * (1 + 1e-12) + 1e-15
            assert bound <= 1.0
    CASES["lemma_dominance"] += 1


@given(ts=scales(scattered_only=True), a=st.floats(0.0, 5.0), p=st.floats(0.0, 3.0), data=st.data())
def test_gronwall_sequences(ts, a, p, data):
    pts = scattered_points(ts)
    u = data.draw(st.lists(st.floats(0.0, 1.0), min_size=len(pts) + 1, max_size=len(pts) + 1))
    y, acc = [], 0.0
    for k in range(len(pts) + 1):
        y.append(u[k] * (a + acc))
        if k < len(pts):
            acc += pts[k][1] * p * y[k]
    times = [s for s, _ in pts] + [ts.end]
    for t, yk in zip(times, y):
        assert yk <= a * scalar_ts_exponential(ts, p, ts.t0, t) * (1 + 1e-12) + 1e-300
    CASES["gronwall"] += 1


@given(ts=scales(scattered_only=True), b=spectra(n_max=3, hi=2.0), g=st.floats(0.1, 1.0), a=st.floats(-0.5, 0.5),
       eps=st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_gronwall_bounds_simulation(ts, b, g, a, eps):
    n = b.shape[0]
    sys_ = StabilitySystem(B=b, gamma=GammaSpec.constant(g), lip=abs(a), F=DynamicsSpec("linear", a),
                           epsilon0=np.array(eps[:n]))
    traj = run(sys_, ts)
    p = abs(a) + g * float(np.linalg.norm(b, 2))
    n0 = float(np.linalg.norm(sys_.epsilon0))
    for t, nrm in zip(traj.times, traj.norms):
        assert nrm <= n0 * scalar_ts_exponential(ts, p, ts.t0, t) * (1 + 1e-12) + 1e-12
    CASES["gronwall_simulation"] += 1


def rk4_error_ratio(b, g, length):
    sys_ = StabilitySystem(B=b, gamma=GammaSpec.constant(g), lip=0.0, epsilon0=np.ones(b.shape[0]))
    exact = expm_series(-g * b * length) @ sys_.epsilon0
    errs = [np.linalg.norm(dense_integrate(sys_, 0.0, length, sys_.epsilon0, h=h) - exact) for h in (0.1, 0.05)]
    return errs[0] / errs[1]


@given(b=spectra(hi=4.0), g=st.floats(0.25, 2.0), k=st.integers(8, 20))
def test_rk4_fourth_order(b, g, k):
    top = g * float(np.max(np.linalg.eigvalsh(b)))
    assume(1.0 <= top <= 8.0)
    ratio = rk4_error_ratio(b, g, k / 10)
    assert 4.0 <= ratio <= 64.0, ratio
    CASES["rk4"] += 1


@given(ts=scales())
def test_point_queries(ts):
    for t in _probe_points(ts):
        s, m = sigma(ts, t), mu(ts, t)
        assert s >= t
        assert m >= 0
        assert (m == 0) == (classify(ts, t) is PointClass.RIGHT_DENSE)
    expected = [(b, mu(ts, b)) for _, b in ts.intervals if classify(ts, b) is PointClass.RIGHT_SCATTERED]
    assert scattered_points(ts) == expected
    CASES["point_queries"] += 1


@given(ts=scales())
def test_decomposition_reconstructs(ts):
    d = decompose(ts)
    flat = [p for grp in d.scattered_points for p in grp]
    assert flat == scattered_points(ts)
    for s, _ in flat:
        assert d.segment_of(s) % 2 == 0
    runs = d.dense_runs()
    dense = [(a, b) for a, b in ts.intervals if b > a]
    assert runs == dense
    for a, b in dense:
        assert d.segment_of((a + b) / 2) % 2 == 1
    finite = d.finite_boundaries
    assert all(x <= y for x, y in zip(finite, finite[1:]))
    assert finite[0] == ts.t0
    CASES["decomposition"] += 1


@given(name=st.sampled_from(["ex1", "ex5", "ex6", "ex8", "ex2"]), extra=st.integers(1, 6), small=st.integers(0, 4))
def test_family_truncations_nest(name, extra, small):
    start = 8 if name == "ex6" else (1 if name == "ex2" else 3)
    lo = build_family(FamilySpec(name, start, start + small, inner_index_max=4))
    hi = build_family(FamilySpec(name, start, start + small + extra, inner_index_max=4))
    assert set(lo.intervals) <= set(hi.intervals)
    CASES["families"] += 1


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def scenario_dicts(draw):
    n = draw(st.integers(1, 3))
    rows = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            rows[i][j] = rows[j][i] = draw(finite)
    ts = draw(scales())
    gamma = draw(st.sampled_from([{"kind": "constant", "value": 1.5}, {"kind": "cosine", "offset": 2, "amplitude": 1},
                                  {"kind": "polynomial", "coeffs": [0.5, 0.25]}]))
    d = {
        "name": draw(st.text("abcxyz019_", min_size=1, max_size=8)),
        "timescale": {"type": "explicit", "intervals": [list(iv) for iv in ts.intervals]},
        "B": rows,
        "gamma": gamma,
        "F": draw(st.sampled_from([{"kind": "linear", "a": 0.1}, {"kind": "sine_field", "a": 0.2, "variant": "inv_t2"}])),
        "lip": draw(st.floats(0, 3)),
        "epsilon0": draw(st.lists(finite, min_size=n, max_size=n)),
        "horizon": ts.end + draw(st.floats(0.0, 5.0)) + 1e-3,
    }
    if draw(st.booleans()):
        d["config"] = {"h": 0.01, "prerequisites": "as_published", "stated": {"mu_star": 0.5}}
    return d


@given(d=scenario_dicts())
def test_scenario_round_trip(d):
    sc = Scenario.from_dict(d)
    again = parse_scenario(sc.to_json())
    assert again == sc
    assert json.loads(again.to_json()) == json.loads(sc.to_json())
    CASES["scenario_round_trip"] += 1


def test_scalar_matches_one_by_one():
    ts = build_explicit([(0, 0), (0.5, 1.5), (2.0, 2.0), (2.5, 3.0)])
    for lam, g in [(0.5, 1.0), (1.2, 0.3)]:
        eig = eigendecompose([[lam]])
        for t in _probe_points(ts):
            m = ts_matrix_exponential(ts, eig, GammaSpec.constant(g), 0.0, t)[0, 0]
            assert math.isclose(m, scalar_ts_exponential(ts, -g * lam, 0.0, t), rel_tol=1e-13)
