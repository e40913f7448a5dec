"""Lambertian constraint sets and the projection primitives built on them.

A received-power measurement ``P`` from a source at ``y`` bounds the receiver
position ``x`` through the Lambertian function

    g(x) = gamma - [(x - y).n_t]^m (y - x).n_r / |x - y|^(m + 3)

whose zero-sublevel set contains the true position when the measurement
error is negative. The set is not convex in general; the two variants used
for estimation replace it by a quasiconvex function of the generic form

    g_eps(x) = threshold - (y - x).n_r / (|x - y|^k + eps)

which is quasiconvex on the halfspace ``(y - x).n_r >= 0``:

* ``CASE1`` (expanded set): ``k = 3``, ``threshold = gamma``. It is a lower
  bound of ``g`` inside the halfspace, so its sublevel set contains the
  original one.
* ``CASE2`` (known height ``h``, downward transmitter): ``k = m + 3``,
  ``threshold = gamma / h^m``. Exact up to ``eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Variant",
    "LambertianConstraint",
    "Halfspace",
    "ConstraintBundle",
    "StalledProjectorError",
    "ArmijoStallError",
    "gamma_from_power",
    "g_value",
    "g_gradient",
    "gradient_norm_sq_closed_form",
    "project_halfspace",
    "project_halfspace_intersection",
    "gradient_project",
    "gradient_projector",
    "armijo_step",
]

EPSILON = 1e-6
TOL_FEAS = 1e-9
DELTA_HALFSPACE = 1e-10
ARMIJO_CAP = 60
# relative cancellation error of ``threshold - u / D``
ROUNDING = 16 * np.finfo(float).eps


class StalledProjectorError(ArithmeticError):
    """Positive constraint value with a vanishing gradient."""


class ArmijoStallError(ArithmeticError):
    """No admissible step size within the halving cap."""


class Variant(str, Enum):
    ORIGINAL = "original"
    CASE1 = "case1"
    CASE2 = "case2"


def gamma_from_power(received: float, transmit_power: float, order: float, area: float) -> float:
    """Threshold ``gamma = (P_r / P_t) * 2 pi / ((m + 1) A)``."""
    return received / transmit_power * 2 * math.pi / ((order + 1) * area)


# --- generic quasiconvex form, row-vectorized --------------------------------

def _generic_values(P, y, nr, thr, k, eps):
    """``thr - (y - P).nr / (|P - y|^k + eps)`` for matching rows."""
    diff = P - y
    u = -np.einsum("...i,...i->...", diff, nr)
    r = np.sqrt(np.einsum("...i,...i->...", diff, diff))
    return thr - u / (r**k + eps)


def _generic_gradients(P, y, nr, k, eps):
    diff = P - y
    u = -np.einsum("...i,...i->...", diff, nr)
    r = np.sqrt(np.einsum("...i,...i->...", diff, diff))
    D = r**k + eps
    # k r^(k-2) (x - y) -> 0 as r -> 0 for the exponents used here (k >= 3)
    rk2 = np.where(r > 0, k * r ** np.maximum(k - 2, 0.0), 0.0)
    coef = u * rk2 / D**2
    return nr / D[..., None] + coef[..., None] * diff


def _original_values(P, y, nt, nr, order, gamma):
    diff = P - y
    s = np.maximum(np.einsum("...i,...i->...", diff, nt), 0.0)
    u = -np.einsum("...i,...i->...", diff, nr)
    r2 = np.einsum("...i,...i->...", diff, diff)
    return gamma - s**order * u / r2 ** ((order + 3) / 2)


def _original_gradients(P, y, nt, nr, order):
    diff = P - y
    s = np.maximum(np.einsum("...i,...i->...", diff, nt), 0.0)
    u = -np.einsum("...i,...i->...", diff, nr)
    r2 = np.einsum("...i,...i->...", diff, diff)
    rp = r2 ** ((order + 3) / 2)
    e = lambda a: np.asarray(a)[..., None]
    grad_f = (e(order * s ** (order - 1) * u / rp) * nt - e(s**order / rp) * nr
              - e((order + 3) * s**order * u / (rp * r2)) * diff)
    return -grad_f


@dataclass(frozen=True)
class LambertianConstraint:
    """One Lambertian feasible set ``{x : g(x) <= 0}``.

    ``source_point`` is already shifted by the receiving PD's offset, so
    ``x`` is the unit centre. ``mask`` zeroes gradient components of
    coordinates that are known (height in 2-D mode).
    """

    source_point: np.ndarray
    n_t: np.ndarray
    n_r: np.ndarray
    order: float
    gamma: float
    epsilon: float = EPSILON
    variant: Variant = Variant.CASE1
    height: float | None = None
    mask: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        for name in ("source_point", "n_t", "n_r", "mask"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.variant is not Variant.ORIGINAL and not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.variant is Variant.CASE2 and not (self.height and self.height > 0):
            raise ValueError("CASE2 needs a positive height")

    @property
    def exponent(self) -> float:
        return 3.0 if self.variant is Variant.CASE1 else self.order + 3.0

    @property
    def gamma_tilde(self) -> float:
        """Threshold actually compared against: ``gamma / h^m`` for CASE2."""
        if self.variant is Variant.CASE2:
            return self.gamma / self.height**self.order
        return self.gamma

    @property
    def region(self) -> "Halfspace":
        """Halfspace on which the function is quasiconvex."""
        return Halfspace(self.source_point, self.n_r, self.mask)

    def in_region(self, x, tol: float = TOL_FEAS) -> bool:
        return float((self.source_point - np.asarray(x)) @ self.n_r) >= -tol

    def value(self, x) -> float:
        return g_value(self, x)

    def gradient(self, x) -> np.ndarray:
        return g_gradient(self, x)


def g_value(c: LambertianConstraint, x) -> float:
    x = np.asarray(x, dtype=float)
    if c.variant is Variant.ORIGINAL:
        return float(_original_values(x, c.source_point, c.n_t, c.n_r, c.order, c.gamma))
    return float(_generic_values(x, c.source_point, c.n_r, c.gamma_tilde, c.exponent, c.epsilon))


def g_gradient(c: LambertianConstraint, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if c.variant is Variant.ORIGINAL:
        g = _original_gradients(x, c.source_point, c.n_t, c.n_r, c.order)
    else:
        g = _generic_gradients(x, c.source_point, c.n_r, c.exponent, c.epsilon)
    return g * c.mask


def gradient_norm_sq_closed_form(c: LambertianConstraint, x) -> float:
    """Squared gradient norm of the generic form, without forming the gradient."""
    x = np.asarray(x, dtype=float)
    k, eps = c.exponent, c.epsilon
    r = float(np.linalg.norm(x - c.source_point))
    u = float((c.source_point - x) @ c.n_r)
    D = r**k + eps
    return 1 / D**2 + (u / D) ** 2 * k * r ** (k - 2) * ((k - 2) * r**k - 2 * eps) / D**2


# --- halfspaces --------------------------------------------------------------

@dataclass(frozen=True)
class Halfspace:
    """``{x : (anchor_point - x).normal >= 0}``, optionally restricted to the
    coordinates selected by ``mask``."""

    anchor_point: np.ndarray
    normal: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = float(np.linalg.norm(n))
        if norm == 0:
            raise ValueError("halfspace normal must be nonzero")
        if abs(norm - 1) > 1e-12:
            n = n / norm
        c = np.asarray(self.anchor_point, dtype=float)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "anchor_point", c)
        # plain-float copies for the projection loops
        nm = n if self.mask is None else n * np.asarray(self.mask, dtype=float)
        object.__setattr__(self, "_cn", float(c @ n))
        object.__setattr__(self, "_n", tuple(float(v) for v in n))
        object.__setattr__(self, "_nm", tuple(float(v) for v in nm))
        object.__setattr__(self, "_nn", float(nm @ nm))

    def slack(self, x) -> float:
        return float((self.anchor_point - np.asarray(x)) @ self.normal)

    def contains(self, x, tol: float = TOL_FEAS) -> bool:
        return self.slack(x) >= -tol

    def _project(self, x: list) -> bool:
        """Project the 3-list ``x`` in place; True when it moved."""
        n = self._n
        s = self._cn - (x[0] * n[0] + x[1] * n[1] + x[2] * n[2])
        if s >= 0 or self._nn == 0.0:
            # inside, or the free coordinates cannot change membership
            return False
        t = s / self._nn
        nm = self._nm
        x[0] += t * nm[0]
        x[1] += t * nm[1]
        x[2] += t * nm[2]
        return True


def project_halfspace(h: Halfspace, x) -> np.ndarray:
    """Orthogonal projection of ``x`` onto ``h`` (within the free coordinates)."""
    p = [float(v) for v in np.asarray(x, dtype=float)]
    h._project(p)
    return np.array(p)


def project_halfspace_intersection(halfspaces: Sequence[Halfspace], x,
                                   delta: float = DELTA_HALFSPACE,
                                   max_iters: int = 1000) -> tuple[np.ndarray, bool]:
    """Cyclic projections onto a finite intersection of halfspaces.

    Sweeps the halfspaces in order until a full sweep moves the point by less
    than ``delta``. Returns ``(point, converged)``; on non-convergence the
    iterate with the smallest worst-case violation is returned.
    """
    p = [float(v) for v in np.asarray(x, dtype=float)]
    if not halfspaces:
        return np.array(p), True
    best, best_viol = list(p), math.inf
    for _ in range(max_iters):
        p0, p1, p2 = p
        moved = False
        for h in halfspaces:
            moved |= h._project(p)
        if not moved or math.sqrt((p[0] - p0) ** 2 + (p[1] - p1) ** 2 + (p[2] - p2) ** 2) < delta:
            return np.array(p), True
        viol = max(-h.slack(p) for h in halfspaces)
        if viol < best_viol:
            best, best_viol = list(p), viol
    return np.array(best), False


# --- gradient projector and step rule ----------------------------------------

def gradient_projector(value: Callable, gradient: Callable, lam: float, x,
                       region: Callable | None = None) -> np.ndarray:
    """Relaxed gradient projection of ``x`` toward ``{value <= 0}``.

    ``x - lam * value+(x) / |grad|^2 * grad``; identity where the value is
    nonpositive or ``region(x)`` is false.
    """
    x = np.asarray(x, dtype=float)
    if lam == 0:
        return x.copy()
    fx = value(x)
    if fx <= 0 or (region is not None and not region(x)):
        return x.copy()
    g = gradient(x)
    gg = float(g @ g)
    if not gg > 0 or not np.isfinite(gg):
        raise StalledProjectorError(f"gradient vanishes at {x} with value {fx:.3e}")
    return x - (lam * fx / gg) * g


def gradient_project(c: LambertianConstraint, lam: float, x) -> np.ndarray:
    if lam < 0:
        raise ValueError("relaxation must be nonnegative")
    return gradient_projector(c.value, c.gradient, lam, x, c.in_region)


def _as_pair(f):
    if isinstance(f, LambertianConstraint):
        return f.value, f.gradient, f.in_region, ROUNDING * abs(f.gamma_tilde)
    value, gradient = f[0], f[1]
    region = f[2] if len(f) > 2 else None
    return value, gradient, region, 0.0


def armijo_step(functions, lam: float, beta: float, xi: float, x,
                max_halvings: int = ARMIJO_CAP) -> float:
    """Largest ``lam * xi**m`` (``m = 0, 1, ...``) giving sufficient decrease.

    A step ``t`` is accepted when every function satisfies
    ``f(G_f^t(x)) <= f(x) * (1 - beta * t)``. ``functions`` holds
    :class:`LambertianConstraint` objects or ``(value, gradient[, region])``
    tuples. Functions positive at ``x`` but outside their region are skipped.
    For constraints the test allows the rounding error of evaluating
    ``g`` (a few ulps of its threshold); otherwise a value within rounding of
    zero, whose projection cannot move ``x``, would shrink the step forever.
    """
    if not lam > 0 or not 0 < beta < 1 or not 0 < xi < 1:
        raise ValueError("need lam > 0 and beta, xi in (0, 1)")
    x = np.asarray(x, dtype=float)
    pairs = []
    for f in functions:
        v, g, r, tol = _as_pair(f)
        # outside its region the projector is the identity and a positive
        # value could never decrease; such functions impose no condition
        if r is not None and not r(x) and v(x) > 0:
            continue
        pairs.append((v, g, r, tol))
    f0 = [v(x) for v, _, _, _ in pairs]
    for m in range(max_halvings + 1):
        t = lam * xi**m
        if all(v(gradient_projector(v, g, t, x, r)) <= fx * (1 - beta * t) + tol
               for (v, g, r, tol), fx in zip(pairs, f0)):
            return t
    raise ArmijoStallError(f"no admissible step after {max_halvings} reductions")


# --- vectorized bundle -------------------------------------------------------

def _row_value(x, row, eps):
    y0, y1, y2, n0, n1, n2, thr, k = row
    d0, d1, d2 = x[0] - y0, x[1] - y1, x[2] - y2
    u = -(d0 * n0 + d1 * n1 + d2 * n2)
    r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
    return thr - u / (r**k + eps), u


def _row_step(x, row, eps, mask, f):
    """``f / |grad|^2 * grad`` for one row, as a 3-tuple."""
    y0, y1, y2, n0, n1, n2, thr, k = row
    d0, d1, d2 = x[0] - y0, x[1] - y1, x[2] - y2
    u = -(d0 * n0 + d1 * n1 + d2 * n2)
    r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
    D = r**k + eps
    coef = u * k * r ** (k - 2) / (D * D) if r > 0 else 0.0
    g0 = (n0 / D + coef * d0) * mask[0]
    g1 = (n1 / D + coef * d1) * mask[1]
    g2 = (n2 / D + coef * d2) * mask[2]
    gg = g0 * g0 + g1 * g1 + g2 * g2
    if not gg > 0:
        raise StalledProjectorError(f"gradient vanishes at {tuple(x)} with value {f:.3e}")
    c = f / gg
    return c * g0, c * g1, c * g2


class ConstraintBundle:
    """A stack of generic-form Lambertian constraints sharing one mask.

    Rows are evaluated together; ``labels`` carries a caller-defined key per
    row, in the order used for tie-breaking.
    """

    def __init__(self, y, nr, threshold, exponent, epsilon=EPSILON, mask=None, labels=()):
        self.y = np.asarray(y, dtype=float).reshape(-1, 3)
        self.nr = np.asarray(nr, dtype=float).reshape(-1, 3)
        self.threshold = np.asarray(threshold, dtype=float).reshape(-1)
        self.exponent = np.asarray(exponent, dtype=float).reshape(-1)
        self.epsilon = float(epsilon)
        self.mask = np.ones(3) if mask is None else np.asarray(mask, dtype=float)
        self.labels = list(labels)
        self._mask = tuple(float(v) for v in self.mask)
        self._row_cache = None

    @property
    def _rows(self) -> list[tuple]:
        if self._row_cache is None:
            table = np.column_stack([self.y, self.nr, self.threshold, self.exponent])
            self._row_cache = [tuple(row) for row in table.tolist()]
        return self._row_cache

    @classmethod
    def from_constraints(cls, constraints: Sequence[LambertianConstraint], labels=()):
        if not constraints:
            return cls(np.zeros((0, 3)), np.zeros((0, 3)), [], [], labels=labels)
        eps = {c.epsilon for c in constraints}
        if len(eps) != 1 or any(c.variant is Variant.ORIGINAL for c in constraints):
            raise ValueError("bundle needs generic-form constraints with a common epsilon")
        return cls([c.source_point for c in constraints], [c.n_r for c in constraints],
                   [c.gamma_tilde for c in constraints], [c.exponent for c in constraints],
                   eps.pop(), constraints[0].mask, labels)

    def __len__(self):
        return len(self.threshold)

    def values(self, x) -> np.ndarray:
        return _generic_values(np.asarray(x, dtype=float), self.y, self.nr,
                               self.threshold, self.exponent, self.epsilon)

    def values_rows(self, P) -> np.ndarray:
        """Value of row ``c`` at point ``P[c]``."""
        return _generic_values(P, self.y, self.nr, self.threshold, self.exponent, self.epsilon)

    def gradients(self, x) -> np.ndarray:
        x = np.broadcast_to(np.asarray(x, dtype=float), self.y.shape)
        return _generic_gradients(x, self.y, self.nr, self.exponent, self.epsilon) * self.mask

    def in_region(self, x, tol: float = TOL_FEAS) -> np.ndarray:
        return np.einsum("ij,ij->i", self.y - np.asarray(x, dtype=float), self.nr) >= -tol

    # single-row operations on plain floats; the cyclic solver calls these
    # once per unit and iteration, where array overhead would dominate

    def value_list(self, x) -> list[float]:
        return [_row_value(x, row, self.epsilon)[0] for row in self._rows]

    def project_row(self, r: int, lam: float, x, tol: float = TOL_FEAS) -> tuple:
        """Gradient projection of ``x`` onto row ``r`` (a 3-tuple)."""
        f, u = _row_value(x, self._rows[r], self.epsilon)
        if lam == 0 or f <= 0 or u < -tol:
            return tuple(x)
        s = _row_step(x, self._rows[r], self.epsilon, self._mask, f)
        return x[0] - lam * s[0], x[1] - lam * s[1], x[2] - lam * s[2]

    def armijo_row(self, r: int, lam: float, beta: float, xi: float, x,
                   max_halvings: int = ARMIJO_CAP, tol: float = TOL_FEAS) -> float:
        """:meth:`armijo` for the single row ``r``."""
        row, eps = self._rows[r], self.epsilon
        f0, u = _row_value(x, row, eps)
        if f0 <= 0 or u < -tol:
            return lam
        s = _row_step(x, row, eps, self._mask, f0)
        slack = ROUNDING * abs(row[6])
        for m in range(max_halvings + 1):
            t = lam * xi**m
            p = (x[0] - t * s[0], x[1] - t * s[1], x[2] - t * s[2])
            if _row_value(p, row, eps)[0] <= f0 * (1 - beta * t) + slack:
                return t
        raise ArmijoStallError(f"no admissible step after {max_halvings} reductions")

    def _steps(self, x, fx, grads, active):
        gg = np.einsum("ij,ij->i", grads, grads)
        bad = active & ~(gg > 0)
        if bad.any():
            raise StalledProjectorError(
                f"gradient vanishes for constraint {self.labels[int(np.argmax(bad))] if self.labels else int(np.argmax(bad))}")
        scale = np.where(active, fx / np.where(active, gg, 1.0), 0.0)
        return scale[:, None] * grads

    def project(self, x, lam, rows=None) -> np.ndarray:
        """Gradient projections of ``x`` onto each row (shape ``(C, 3)``).

        ``lam`` is a scalar or per-row array. Rows outside their region or
        already satisfied map to ``x``.
        """
        x = np.asarray(x, dtype=float)
        fx = self.values(x)
        active = (fx > 0) & self.in_region(x)
        if rows is not None:
            keep = np.zeros(len(self), dtype=bool)
            keep[rows] = True
            active &= keep
        if not active.any():
            return np.broadcast_to(x, self.y.shape).copy()
        steps = self._steps(x, fx, self.gradients(x), active)
        return x - np.asarray(lam, dtype=float).reshape(-1, 1) * steps

    def armijo(self, rows, lam: float, beta: float, xi: float, x,
               max_halvings: int = ARMIJO_CAP) -> float:
        """:func:`armijo_step` over the selected rows, evaluated together."""
        rows = np.asarray(rows, dtype=int)
        if rows.size == 0:
            return lam
        x = np.asarray(x, dtype=float)
        sub = ConstraintBundle(self.y[rows], self.nr[rows], self.threshold[rows],
                               self.exponent[rows], self.epsilon, self.mask)
        fx = sub.values(x)
        active = (fx > 0) & sub.in_region(x)
        if not active.any():
            return lam
        steps = sub._steps(x, fx, sub.gradients(x), active)
        steps, fa = steps[active], fx[active]
        sub_a = ConstraintBundle(sub.y[active], sub.nr[active], sub.threshold[active],
                                 sub.exponent[active], sub.epsilon, sub.mask)
        tol = ROUNDING * np.abs(sub_a.threshold)
        for m in range(max_halvings + 1):
            t = lam * xi**m
            if np.all(sub_a.values_rows(x - t * steps) <= fa * (1 - beta * t) + tol):
                return t
        raise ArmijoStallError(f"no admissible step after {max_halvings} reductions")
