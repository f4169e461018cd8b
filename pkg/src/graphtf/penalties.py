"""Sparsity penalties: l1, SCAD and MCP.

Each penalty ``rho(t; lam, gamma)`` is symmetric, zero at the origin,
non-decreasing on ``t >= 0`` and bounded by ``lam * |t|``. SCAD and MCP are
weakly convex: ``rho(t) + mu / 2 * t**2`` is convex for ``mu`` equal to
``1 / (gamma - 1)`` and ``1 / gamma`` respectively.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("l1", "scad", "mcp")
DEFAULT_GAMMA = {"scad": 3.7, "mcp": 1.4}


@dataclass(frozen=True)
class Penalty:
    kind: str
    lam: float
    gamma: float | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise ValueError("lambda must be finite and nonnegative")
        if kind == "l1":
            object.__setattr__(self, "gamma", None)
            return
        gamma = DEFAULT_GAMMA[kind] if self.gamma is None else float(self.gamma)
        if kind == "scad" and gamma < 2:
            raise ValueError("SCAD requires gamma >= 2")
        if kind == "mcp" and gamma < 1:
            raise ValueError("MCP requires gamma >= 1")
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def parse(cls, spec: str) -> "Penalty":
        """Parse ``"scad:lambda=2,gamma=3.7"`` style strings."""
        kind, _, rest = spec.partition(":")
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, _, value = item.partition("=")
            key = key.strip().lower()
            if key in ("lambda", "lam"):
                params["lam"] = float(value)
            elif key == "gamma":
                params["gamma"] = float(value)
            else:
                raise ValueError(f"unknown penalty parameter {key!r} in {spec!r}")
        if "lam" not in params:
            raise ValueError(f"penalty spec {spec!r} is missing lambda")
        return cls(kind.strip(), **params)

    def spec(self) -> str:
        if self.kind == "l1":
            return f"l1:lambda={self.lam!r}"
        return f"{self.kind}:lambda={self.lam!r},gamma={self.gamma!r}"

    def with_lambda(self, lam: float) -> "Penalty":
        return Penalty(self.kind, lam, self.gamma)

    @property
    def mu(self) -> float:
        """Weak-convexity constant (the smallest valid one)."""
        if self.kind == "l1":
            return 0.0
        if self.kind == "scad":
            return 1.0 / (self.gamma - 1.0)
        return 1.0 / self.gamma

    # scalar functions, vectorized over numpy input

    def value(self, t):
        return rho(self, t)

    def derivative(self, t):
        return rho_derivative(self, t)

    def prox(self, v, alpha):
        return prox_scalar(self, v, alpha)

    def total(self, x) -> float:
        return float(np.sum(rho(self, x)))


def rho(p: Penalty, t):
    a = np.abs(np.asarray(t, dtype=float))
    lam = p.lam
    if p.kind == "l1":
        out = lam * a
    elif p.kind == "scad":
        g = p.gamma
        out = np.where(
            a <= lam,
            lam * a,
            np.where(
                a <= g * lam,
                (2 * g * lam * a - a**2 - lam**2) / (2 * (g - 1)),
                lam**2 * (g + 1) / 2,
            ),
        )
    else:
        g = p.gamma
        out = np.where(a <= g * lam, lam * a - a**2 / (2 * g), g * lam**2 / 2)
    return out if out.ndim else float(out)


def rho_derivative(p: Penalty, t):
    """``d rho / dt``; at ``t = 0`` this returns the right limit ``lam``."""
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    lam = p.lam
    if p.kind == "l1":
        mag = np.full_like(a, lam)
    elif p.kind == "scad":
        g = p.gamma
        mag = np.where(a <= lam, lam, np.maximum(g * lam - a, 0.0) / (g - 1))
    else:
        mag = np.maximum(lam - a / p.gamma, 0.0)
    sign = np.where(t < 0, -1.0, 1.0)
    out = sign * mag
    return out if out.ndim else float(out)


def check_step(p: Penalty, alpha: float) -> None:
    if alpha <= 0:
        raise ValueError("prox step alpha must be positive")
    if alpha * p.mu >= 1:
        raise ValueError(
            f"prox step alpha={alpha} with mu={p.mu} gives alpha*mu >= 1; "
            "the prox subproblem is not strongly convex (need tau > mu)"
        )


def prox_scalar(p: Penalty, v, alpha: float):
    """``argmin_x 0.5 * (x - v)**2 + alpha * rho(x)``, elementwise.

    Soft thresholding for l1, firm thresholding for MCP and the three-piece
    SCAD rule generalized to step ``alpha``. Requires ``alpha * mu < 1``.
    """
    check_step(p, alpha)
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    s = np.sign(v)
    lam = p.lam
    soft = np.maximum(a - alpha * lam, 0.0)
    if p.kind == "l1":
        mag = soft
    elif p.kind == "mcp":
        g = p.gamma
        mag = np.where(a <= g * lam, soft / (1 - alpha / g), a)
    else:
        g = p.gamma
        mid = ((g - 1) * a - alpha * g * lam) / (g - 1 - alpha)
        mag = np.where(a <= (1 + alpha) * lam, soft, np.where(a <= g * lam, mid, a))
    out = s * mag
    return out if out.ndim else float(out)


def prox_group(p: Penalty, v, alpha: float):
    """Prox of ``x -> rho(||x||_2)``: shrink the norm, keep the direction.

    ``v`` may be a vector or a matrix; for a matrix each row is treated as
    one group.
    """
    v = np.asarray(v, dtype=float)
    rows = np.atleast_2d(v)
    norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))
    shrunk = prox_scalar(p, norms, alpha)
    scale = np.divide(shrunk, norms, out=np.zeros_like(norms), where=norms > 0)
    out = rows * scale[:, None]
    return out.reshape(v.shape)


@dataclass
class AssumptionReport:
    symmetric_monotone: bool
    ratio_nonincreasing: bool
    convex_with_mu: bool
    mu: float

    @property
    def passed(self) -> bool:
        return self.symmetric_monotone and self.ratio_nonincreasing and self.convex_with_mu

    def as_dict(self) -> dict:
        return {
            "symmetric_monotone": self.symmetric_monotone,
            "ratio_nonincreasing": self.ratio_nonincreasing,
            "convex_with_mu": self.convex_with_mu,
            "mu": self.mu,
            "passed": self.passed,
        }


def validate_assumption1(p: Penalty, grid=None, mu: float | None = None) -> AssumptionReport:
    """Numerically check the penalty regularity conditions on a grid.

    (a) ``rho(0) = 0``, symmetry, monotone on ``t >= 0``;
    (b) ``rho(t) / t`` non-increasing for ``t > 0`` and ``rho(t) <= lam |t|``;
    (c) ``rho(t) + mu / 2 * t**2`` convex (nonnegative second differences).
    ``mu`` defaults to the penalty's own constant.
    """
    if grid is None:
        top = 3 * p.lam * (p.gamma or 1.0) + 1.0
        grid = np.linspace(-top, top, 4001)
    t = np.unique(np.abs(np.asarray(grid, dtype=float)))
    # drop near-duplicates left by folding a symmetric grid
    t = t[np.concatenate([[True], np.diff(t) > 1e-9 * max(t[-1], 1.0)])]
    t = np.concatenate([-t[::-1], t[t > 0]])
    mu = p.mu if mu is None else float(mu)
    vals = rho(p, t)
    scale = max(1.0, float(np.abs(vals).max()), float(mu * (t**2).max()))
    tol = 1e-10 * scale

    pos = t >= 0
    sym = np.allclose(vals, rho(p, -t), rtol=0, atol=tol)
    mono = bool(np.all(np.diff(vals[pos]) >= -tol))
    zero = abs(rho(p, 0.0)) <= tol
    a_ok = bool(sym and mono and zero)

    tp = t[t > 0]
    ratio = rho(p, tp) / tp
    b_ok = bool(np.all(np.diff(ratio) <= tol) and np.all(rho(p, tp) <= p.lam * tp + tol))

    f = vals + 0.5 * mu * t**2
    h = np.diff(t)
    slopes = np.diff(f) / h
    curvature = np.diff(slopes) / (0.5 * (h[1:] + h[:-1]))
    c_ok = bool(np.all(curvature >= -1e-6 * max(1.0, mu)))
    return AssumptionReport(a_ok, b_ok, c_ok, mu)
