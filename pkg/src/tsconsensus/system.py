"""Inputs shared by the certifier and the simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .spectral import GammaSpec, as_symmetric

_F_KINDS = ("zero", "linear", "linear_decay", "scaled_linear", "sine_field")
_SINE_VARIANTS = ("inv_t2", "inv_sqrt_t")


@dataclass(frozen=True)
class DynamicsSpec:
    """Agent self-dynamics F(t, x).

    ``linear``: ``a*x``; ``linear_decay``: ``a*x/t^2``; ``scaled_linear``:
    ``a*x/t``; ``sine_field``: ``a*w(t)*sin(x)`` componentwise with
    ``w = 1/t^2`` (``inv_t2``) or ``1/sqrt(t)`` (``inv_sqrt_t``).
    """

    kind: str
    a: float = 0.0
    variant: str | None = None

    def __post_init__(self):
        if self.kind not in _F_KINDS:
            raise ValueError(f"unknown dynamics kind {self.kind!r}")
        if self.kind == "sine_field" and self.variant not in _SINE_VARIANTS:
            raise ValueError(f"sine_field needs variant in {_SINE_VARIANTS}, got {self.variant!r}")

    @property
    def is_affine(self) -> bool:
        return self.kind != "sine_field"

    def weight(self, t):
        if self.kind == "linear_decay" or (self.kind == "sine_field" and self.variant == "inv_t2"):
            return 1.0 / (t * t)
        if self.kind == "scaled_linear":
            return 1.0 / t
        if self.kind == "sine_field":
            return 1.0 / np.sqrt(t)
        return 1.0 if np.ndim(t) == 0 else np.ones_like(t)

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros_like(x, dtype=float)
        if self.kind == "sine_field":
            return self.a * self.weight(t) * np.sin(x)
        return self.a * self.weight(t) * x

    def diff(self, t: float, x: np.ndarray, x_lead: np.ndarray) -> np.ndarray:
        """``F(t, x) - F(t, x_lead)``."""
        return self(t, x) - self(t, x_lead)

    def batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        """F evaluated row-wise: ``t`` has shape (s,), ``x`` shape (s, n)."""
        if self.kind == "zero":
            return np.zeros_like(x)
        w = np.asarray(self.weight(t), dtype=float)[:, None]
        if self.kind == "sine_field":
            return self.a * w * np.sin(x)
        return self.a * w * x

    def coefficient(self, t: float) -> float:
        """Scalar ``c(t)`` with ``F(t, x) - F(t, y) = c(t) (x - y)`` for affine kinds."""
        if not self.is_affine:
            raise ValueError(f"{self.kind} is not affine in x")
        if self.kind == "zero":
            return 0.0
        return self.a * float(self.weight(t))

    def coefficient_integral(self, lo: float, hi: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "linear":
            return self.a * (hi - lo)
        if self.kind == "linear_decay":
            return self.a * (1.0 / lo - 1.0 / hi)
        if self.kind == "scaled_linear":
            return self.a * math.log(hi / lo)
        raise ValueError(f"{self.kind} is not affine in x")

    def lipschitz(self, t_min: float) -> float:
        """Analytic Lipschitz bound on ``t >= t_min``: ``|a| * max(1, w(t_min))``."""
        if self.kind == "zero":
            return 0.0
        return abs(self.a) * max(1.0, float(self.weight(t_min)))

    def kernel_code(self) -> tuple[int, float]:
        if self.kind == "zero":
            return kernels.F_ZERO, 0.0
        if self.kind == "linear":
            return kernels.F_LINEAR, self.a
        if self.kind == "linear_decay":
            return kernels.F_LINEAR_DECAY, self.a
        if self.kind == "scaled_linear":
            return kernels.F_SCALED_LINEAR, self.a
        if self.variant == "inv_t2":
            return kernels.F_SINE_INV_T2, self.a
        return kernels.F_SINE_INV_SQRT_T, self.a

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "a": self.a}
        if self.variant is not None:
            d["variant"] = self.variant
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DynamicsSpec":
        return cls(d["kind"], float(d.get("a", 0.0)), d.get("variant"))


@dataclass(frozen=True)
class TrajectorySpec:
    """Leader trajectory x0(t); only constant leaders are supported."""

    kind: str = "zero"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant"):
            raise ValueError(f"unknown leader kind {self.kind!r}")

    def __call__(self, t: float) -> float:
        return 0.0 if self.kind == "zero" else self.value

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"kind": "zero"}
        return {"kind": "constant", "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectorySpec":
        if d["kind"] == "zero":
            return cls()
        return cls("constant", float(d["value"]))


@dataclass(frozen=True, eq=False)
class StabilitySystem:
    B: np.ndarray
    gamma: GammaSpec
    lip: float
    F: DynamicsSpec = field(default_factory=lambda: DynamicsSpec("zero"))
    leader: TrajectorySpec = field(default_factory=TrajectorySpec)
    epsilon0: np.ndarray | None = None
    t0: float | None = None

    def __post_init__(self):
        B = as_symmetric(self.B)
        object.__setattr__(self, "B", B)
        n = B.shape[0]
        eps0 = np.zeros(n) if self.epsilon0 is None else np.asarray(self.epsilon0, dtype=float)
        if eps0.shape != (n,):
            raise ValueError(f"epsilon0 has shape {eps0.shape}, expected ({n},)")
        object.__setattr__(self, "epsilon0", eps0)
        if self.lip < 0:
            raise ValueError("the Lipschitz constant must be nonnegative")

    @property
    def n(self) -> int:
        return self.B.shape[0]

    def lead_vector(self, t: float) -> np.ndarray:
        return np.full(self.n, self.leader(t))
