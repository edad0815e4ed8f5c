"""Truncated time scales as ordered unions of disjoint closed intervals.

A time scale window is stored as sorted pairs ``(a_k, b_k)``. ``a_k == b_k``
is an isolated point. The final interval may extend to +infinity
(``unbounded_tail``), in which case its stored right end is ``math.inf``.

Only right classification is modelled: a point is right-scattered when its
forward jump lands strictly to the right, right-dense otherwise.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

TOL = 1e-12

# What the scale looks like past its last stored interval.
CONTINUATIONS = ("scattered", "dense", "mixed")


class TimeScaleError(ValueError):
    pass


class OverlapError(TimeScaleError):
    pass


class EmptyError(TimeScaleError):
    pass


class NegativeStartError(TimeScaleError):
    pass


class NotInScaleError(TimeScaleError):
    pass


class WindowError(TimeScaleError):
    pass


class UnknownFamilyError(TimeScaleError):
    pass


class PointClass(enum.Enum):
    RIGHT_SCATTERED = "S"
    RIGHT_DENSE = "D"


@dataclass(frozen=True)
class ExtendedReal:
    """A decomposition boundary: a finite time, +infinity, or a truncation marker.

    Arithmetic is deliberately unsupported; call :meth:`require_finite` to get
    a float out.
    """

    kind: str
    value: float = math.nan

    @classmethod
    def finite(cls, x: float) -> "ExtendedReal":
        return cls("finite", float(x))

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    def require_finite(self) -> float:
        if self.kind != "finite":
            raise TypeError(f"boundary is {self.kind}, not a finite time")
        return self.value

    def __float__(self) -> float:
        return self.require_finite()

    def _no_arith(self, *_):
        raise TypeError("arithmetic on extended-real boundaries is not defined")

    __add__ = __radd__ = __sub__ = __rsub__ = __mul__ = __rmul__ = _no_arith
    __truediv__ = __rtruediv__ = __neg__ = _no_arith

    def __eq__(self, other):
        if isinstance(other, ExtendedReal):
            if self.kind != other.kind:
                return False
            return self.kind != "finite" or self.value == other.value
        if isinstance(other, (int, float)):
            if math.isinf(other) and other > 0:
                return self.kind == "infinity"
            return self.kind == "finite" and self.value == other
        return NotImplemented

    def __hash__(self):
        return hash((self.kind, self.value if self.kind == "finite" else None))

    def __str__(self) -> str:
        if self.kind == "infinity":
            return "inf"
        if self.kind == "truncated":
            return "truncated"
        return format(self.value, ".12g")


INFINITY = ExtendedReal("infinity")
TRUNCATED = ExtendedReal("truncated")


@dataclass(frozen=True)
class TimeScale:
    intervals: tuple[tuple[float, float], ...]
    unbounded_tail: bool = False
    horizon: float | None = None
    # behaviour beyond the stored intervals; None means unknown
    continuation: str | None = None
    # first point past the stored intervals, when the scale goes on
    successor: float | None = None
    _starts: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_starts", tuple(a for a, _ in self.intervals))

    @property
    def t0(self) -> float:
        return self.intervals[0][0]

    @property
    def end(self) -> float:
        """Right end of the working window (``inf`` for an unclipped tail)."""
        if self.horizon is not None:
            return self.horizon
        return self.intervals[-1][1]

    def _locate(self, t: float) -> int:
        k = bisect.bisect_right(self._starts, t + TOL) - 1
        if k < 0:
            raise NotInScaleError(f"t={t!r} precedes the scale start {self.t0!r}")
        a, b = self.intervals[k]
        if t > b + TOL:
            raise NotInScaleError(f"t={t!r} is not a point of the time scale")
        if self.horizon is not None and t > self.horizon + TOL:
            raise NotInScaleError(f"t={t!r} lies beyond the horizon {self.horizon!r}")
        return k

    def __contains__(self, t: float) -> bool:
        try:
            self._locate(t)
        except NotInScaleError:
            return False
        return True

    def windowed(self, horizon: float | None = None) -> "TimeScale":
        """Bounded copy of the scale restricted to ``[T0, horizon]``.

        The dropped part is summarised in ``continuation`` so that the
        decomposition can still tell an infinite boundary from a truncated one.
        """
        h = self.horizon if horizon is None else horizon
        if h is None:
            if self.unbounded_tail:
                raise WindowError("an unbounded tail needs a horizon")
            return self
        if h < self.t0:
            raise WindowError(f"horizon {h!r} precedes T0={self.t0!r}")
        kept: list[tuple[float, float]] = []
        for a, b in self.intervals:
            if a > h + TOL:
                break
            kept.append((a, min(b, h)))
        cont = self.continuation
        if self.unbounded_tail:
            only_tail_cut = len(kept) == len(self.intervals)
            if only_tail_cut:
                cont = "dense"
            elif cont is None:
                cont = "mixed"
        k = len(kept) - 1
        if kept[k][1] < self.intervals[k][1]:
            succ = None
        elif k + 1 < len(self.intervals):
            succ = self.intervals[k + 1][0]
        else:
            succ = self.successor
        return TimeScale(tuple(kept), False, None, cont, succ)


# ---------------------------------------------------------------------------
# construction


def _validate(intervals: Sequence[tuple[float, float]]) -> None:
    if not intervals:
        raise EmptyError("a time scale needs at least one interval")
    if intervals[0][0] < 0:
        raise NegativeStartError(f"T0={intervals[0][0]!r} is negative")
    for k, (a, b) in enumerate(intervals):
        if not (a <= b):
            raise OverlapError(f"interval {k} has a > b: ({a!r}, {b!r})")
        if k and not (intervals[k - 1][1] < a):
            raise OverlapError(
                f"intervals {k - 1} and {k} overlap or are out of order: "
                f"{intervals[k - 1]!r}, {(a, b)!r}"
            )


def build_explicit(
    intervals: Iterable[Sequence[float]],
    unbounded_tail: bool = False,
    horizon: float | None = None,
    continuation: str | None = None,
) -> TimeScale:
    """Validate a list of closed intervals and wrap it as a :class:`TimeScale`.

    With ``unbounded_tail`` the final interval becomes ``[a_last, inf)``.
    """
    ivs = [(float(a), float(b)) for a, b in intervals]
    _validate(ivs)
    if unbounded_tail:
        ivs[-1] = (ivs[-1][0], math.inf)
        continuation = "dense"
    if horizon is not None and horizon < ivs[0][0]:
        raise WindowError(f"horizon {horizon!r} precedes T0={ivs[0][0]!r}")
    return TimeScale(tuple(ivs), unbounded_tail, horizon, continuation)


@dataclass(frozen=True)
class FamilySpec:
    name: str
    index_start: int | None = None
    index_max: int | None = None
    inner_index_max: int | None = None


# name -> (default index_start, continuation past the truncation)
FAMILIES = {
    "ex1": (3, "mixed"),
    "ex2": (1, "mixed"),
    "ex5": (3, "mixed"),
    "ex6": (8, "scattered"),
    "ex8": (3, "mixed"),
    "ex9": (None, "dense"),
}


def build_family(spec: FamilySpec, horizon: float | None = None) -> TimeScale:
    """Finite truncation of one of the built-in parametric time scales.

    ``ex1``: ``[i/2, i/2 + 1/i^3]``; ``ex5``: ``[i/2, i/2 + 1/i]``;
    ``ex8``: ``[i/2 + 1/(i+1), i/2 + 1/i]``; ``ex2``: integers ``i`` plus the
    points ``i + 1/(j+1)`` for ``2 <= j <= inner_index_max``;
    ``ex6``: ``[1,2] u [3,7] u {n : index_start <= n <= index_max}``;
    ``ex9``: ``{1} u {11} u [12, inf)`` (needs a horizon).
    """
    if spec.name not in FAMILIES:
        raise UnknownFamilyError(f"unknown family {spec.name!r}; known: {sorted(FAMILIES)}")
    default_start, cont = FAMILIES[spec.name]
    if spec.name == "ex9":
        return build_explicit([(1, 1), (11, 11), (12, 12)], True, horizon)

    i0 = default_start if spec.index_start is None else int(spec.index_start)
    if spec.index_max is None:
        raise TimeScaleError(f"family {spec.name!r} needs index_max")
    n = int(spec.index_max)
    if n < i0:
        raise TimeScaleError(f"index_max={n} is below index_start={i0}")

    ivs: list[tuple[float, float]] = []
    if spec.name == "ex1":
        ivs = [(i / 2, i / 2 + 1 / i**3) for i in range(i0, n + 1)]
        succ = (n + 1) / 2
    elif spec.name == "ex5":
        ivs = [(i / 2, i / 2 + 1 / i) for i in range(i0, n + 1)]
        succ = (n + 1) / 2
    elif spec.name == "ex8":
        ivs = [(i / 2 + 1 / (i + 1), i / 2 + 1 / i) for i in range(i0, n + 1)]
        succ = (n + 1) / 2 + 1 / (n + 2)
    elif spec.name == "ex2":
        jmax = 2 if spec.inner_index_max is None else int(spec.inner_index_max)
        if jmax < 2:
            raise TimeScaleError("ex2 needs inner_index_max >= 2")
        for i in range(i0, n + 1):
            ivs.append((float(i), float(i)))
            for j in range(jmax, 1, -1):
                p = i + 1 / (j + 1)
                ivs.append((p, p))
        succ = float(n + 1)
    elif spec.name == "ex6":
        if i0 < 8:
            raise TimeScaleError("ex6 isolated points start at 8 or later")
        ivs = [(1.0, 2.0), (3.0, 7.0)] + [(float(k), float(k)) for k in range(i0, n + 1)]
        succ = float(n + 1)
    _validate(ivs)
    ts = TimeScale(tuple(ivs), False, None, cont, succ)
    if horizon is not None:
        ts = ts.windowed(horizon)
    return ts


# ---------------------------------------------------------------------------
# point queries


def sigma(ts: TimeScale, t: float) -> float:
    """Forward jump: least point of ``ts`` strictly after ``t`` (``t`` if none)."""
    k = ts._locate(t)
    a, b = ts.intervals[k]
    if t < b - TOL:
        return t
    if k + 1 < len(ts.intervals):
        return ts.intervals[k + 1][0]
    return t if ts.successor is None else ts.successor


def is_max_point(ts: TimeScale, t: float) -> bool:
    k = ts._locate(t)
    return k == len(ts.intervals) - 1 and t >= ts.intervals[k][1] - TOL and ts.successor is None


def mu(ts: TimeScale, t: float) -> float:
    """Graininess ``sigma(t) - t``; exactly 0 at right-dense points."""
    k = ts._locate(t)
    a, b = ts.intervals[k]
    if t < b - TOL:
        return 0.0
    if k + 1 == len(ts.intervals):
        return 0.0 if ts.successor is None else ts.successor - b
    return ts.intervals[k + 1][0] - b


def classify(ts: TimeScale, t: float) -> PointClass:
    return PointClass.RIGHT_SCATTERED if mu(ts, t) > 0 else PointClass.RIGHT_DENSE


def scattered_points(ts: TimeScale) -> list[tuple[float, float]]:
    """All right-scattered points with their graininess, ascending."""
    ivs = ts.intervals
    end = ts.end
    out = []
    for k in range(len(ivs) - 1):
        b = ivs[k][1]
        if b >= end + TOL:
            break
        out.append((b, ivs[k + 1][0] - b))
    else:
        b = ivs[-1][1]
        if ts.successor is not None and b < end + TOL:
            out.append((b, ts.successor - b))
    return out


def scattered_points_in(ts: TimeScale, start: float, stop: float) -> list[tuple[float, float]]:
    """Right-scattered points in ``[start, stop)`` paired with ``mu``."""
    if start > stop:
        raise WindowError(f"empty window [{start!r}, {stop!r})")
    if start < ts.t0 - TOL or stop > ts.end + TOL:
        raise WindowError(f"[{start!r}, {stop!r}) leaves the window [{ts.t0!r}, {ts.end!r}]")
    ivs = ts.intervals
    k = max(bisect.bisect_right(ts._starts, start + TOL) - 1, 0)
    out = []
    for j in range(k, len(ivs)):
        b = ivs[j][1]
        if b >= stop - TOL:
            break
        if j + 1 < len(ivs):
            nxt = ivs[j + 1][0]
        elif ts.successor is not None:
            nxt = ts.successor
        else:
            break
        if b >= start - TOL:
            out.append((b, nxt - b))
    return out


def dense_pieces(ts: TimeScale, start: float, stop: float) -> list[tuple[float, float]]:
    """Maximal sub-intervals of ``[start, stop]`` covered by nondegenerate intervals."""
    ivs = ts.intervals
    k = max(bisect.bisect_right(ts._starts, start + TOL) - 1, 0)
    out = []
    for j in range(k, len(ivs)):
        a, b = ivs[j]
        if a >= stop:
            break
        lo, hi = max(a, start), min(b, stop)
        if hi > lo:
            out.append((lo, hi))
    return out


# ---------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True)
class SegmentDecomposition:
    """Alternating boundaries ``T0 <= T1 <= ...``.

    ``[T_{2i}, T_{2i+1})`` holds right-scattered points, ``[T_{2i+1}, T_{2i+2})``
    is a right-dense run. The list stops at the first non-finite boundary;
    every later boundary equals it. ``scattered_points[i]`` lists the points
    of the i-th scattered segment with their graininess.
    """

    boundaries: tuple[ExtendedReal, ...]
    scattered_points: tuple[tuple[tuple[float, float], ...], ...]
    window_end: float

    def boundary(self, j: int) -> ExtendedReal:
        if j < len(self.boundaries):
            return self.boundaries[j]
        return self.boundaries[-1]

    @property
    def finite_boundaries(self) -> list[float]:
        return [b.value for b in self.boundaries if b.is_finite]

    def dense_runs(self) -> list[tuple[float, float]]:
        """Dense runs ``[T_{2j-1}, T_{2j}]`` clipped at the window end, j = 1, 2, ..."""
        out = []
        j = 1
        while True:
            lo = self.boundary(2 * j - 1)
            if not lo.is_finite:
                break
            hi = self.boundary(2 * j)
            out.append((lo.value, hi.value if hi.is_finite else self.window_end))
            if not hi.is_finite:
                break
            j += 1
        return out

    def segment_of(self, t: float) -> int:
        """Index ``j`` with ``T_j <= t < T_{j+1}`` (ties go to the later, nonempty segment)."""
        j = 0
        for k in range(1, len(self.boundaries)):
            b = self.boundaries[k]
            if not b.is_finite or b.value > t + TOL:
                break
            j = k
        return j

    def labels(self) -> str:
        return " ".join(f"T{j}={b}" for j, b in enumerate(self.boundaries))


def decompose(ts: TimeScale) -> SegmentDecomposition:
    """Alternating scattered/dense decomposition of a (windowed) time scale."""
    if ts.unbounded_tail and ts.horizon is None:
        # the tail is one endless dense run; nothing finite is lost
        w = TimeScale(ts.intervals[:-1] + ((ts.intervals[-1][0], ts.intervals[-1][0]),), False, None, "dense", None)
        return _decompose_bounded(w, last_is_dense_start=True)
    w = ts.windowed() if (ts.unbounded_tail or ts.horizon is not None) else ts
    return _decompose_bounded(w, last_is_dense_start=False)


def _decompose_bounded(ts: TimeScale, last_is_dense_start: bool) -> SegmentDecomposition:
    ivs = ts.intervals
    cont = ts.continuation
    last = len(ivs) - 1
    bounds = [ExtendedReal.finite(ivs[0][0])]
    groups: list[list[tuple[float, float]]] = [[]]
    in_scattered = True  # looking for T_{2i+1}

    def finish(marker: ExtendedReal):
        bounds.append(marker)

    for k, (a, b) in enumerate(ivs):
        dense_start = a < b or (k == last and last_is_dense_start)
        if dense_start:
            if in_scattered:
                bounds.append(ExtendedReal.finite(a))
                in_scattered = False
            if k == last:
                if last_is_dense_start or cont == "dense":
                    finish(INFINITY)
                elif ts.successor is not None:
                    bounds.append(ExtendedReal.finite(b))
                    groups.append([(b, ts.successor - b)])
                    finish(INFINITY if cont == "scattered" else TRUNCATED)
                elif cont == "scattered":
                    bounds.append(ExtendedReal.finite(b))
                    finish(INFINITY)
                else:
                    finish(TRUNCATED)
                break
            bounds.append(ExtendedReal.finite(b))
            groups.append([(b, ivs[k + 1][0] - b)])
            in_scattered = True
        else:
            if k == last:
                if ts.successor is not None:
                    groups[-1].append((a, ts.successor - a))
                finish(INFINITY if cont == "scattered" else TRUNCATED)
                break
            groups[-1].append((a, ivs[k + 1][0] - a))

    # one group per even segment [T_{2i}, T_{2i+1}) with finite T_{2i}
    n_even = sum(1 for j in range(0, len(bounds), 2) if bounds[j].is_finite)
    groups = groups[:n_even] + [[] for _ in range(n_even - len(groups))]
    return SegmentDecomposition(
        tuple(bounds),
        tuple(tuple(g) for g in groups),
        ts.end if math.isfinite(ts.end) else ivs[-1][0],
    )
