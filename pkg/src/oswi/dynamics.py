"""Fixed points and iteration of phi_a(x) = f(a x)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .activations import ActivationSpec, evaluate, omega, supremum_bound
from .errors import BracketFailure, DomainError, NoSuchR
from .special import norm_cdf

SUB_CRITICAL = "subcritical"
SUPER_CRITICAL = "supercritical"

BOUNDARY_RTOL = 1e-12
BISECT_MAX_ITER = 200
BISECT_TOL = 1e-14
MAX_R_STEPS = 10**6


@dataclass(frozen=True)
class FixedPointSet:
    regime: str
    xi_a: float
    residual: float

    @property
    def points(self) -> tuple[float, ...]:
        if self.regime == SUB_CRITICAL:
            return (0.0,)
        return (-self.xi_a, 0.0, self.xi_a)


@dataclass(frozen=True)
class IterationTrace:
    a: float
    x0: float
    values: np.ndarray

    @property
    def converged_to(self) -> float:
        return float(self.values[-1])


def solve_xi(spec: ActivationSpec, a: float) -> FixedPointSet:
    """Nonnegative fixed point of x -> f(a x).

    Bisection on g(x) = f(a x) - x over [eps, sup|f|]; g > 0 just right of
    zero and g < 0 at the supremum whenever a > omega.
    """
    if not a > 0:
        raise DomainError("gain a must be positive")
    w = omega(spec)
    if a <= w * (1.0 + BOUNDARY_RTOL):
        return FixedPointSet(SUB_CRITICAL, 0.0, 0.0)

    def g(x):
        return evaluate(spec, a * x) - x

    hi = supremum_bound(spec)
    g_hi = g(hi)
    if g_hi == 0.0:  # f has saturated to its supremum in floating point
        return FixedPointSet(SUPER_CRITICAL, hi, 0.0)
    lo = hi * 1e-3
    for _ in range(BISECT_MAX_ITER):
        if g(lo) > 0:
            break
        lo *= 0.5
    else:
        raise BracketFailure(f"no positive value of f(a x) - x found near zero for a={a}")
    if g_hi > 0:
        raise BracketFailure("f(a x) - x does not change sign on [eps, sup|f|]")

    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo <= BISECT_TOL * max(1.0, hi):
            break
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    xi = lo if abs(g(lo)) <= abs(g(hi)) else hi
    return FixedPointSet(SUPER_CRITICAL, xi, abs(g(xi)))


def iterate(spec: ActivationSpec, a: float, x0: float, n: int) -> IterationTrace:
    if n < 1:
        raise DomainError("n must be >= 1")
    values = np.empty(n + 1)
    values[0] = x0
    for i in range(n):
        values[i + 1] = evaluate(spec, a * values[i])
    return IterationTrace(a, x0, values)


def compose_varying(spec: ActivationSpec, gains, x0):
    """Apply phi_{a_1}, then phi_{a_2}, ... to x0.

    ``x0`` may be an array, in which case ``gains`` may have a matching
    trailing shape (one gain sequence per entry, gains[j] for step j).
    """
    gains = np.asarray(gains, dtype=float)
    if gains.shape[0] == 0:
        raise DomainError("gains must be nonempty")
    x = np.asarray(x0, dtype=float)
    for a in gains:
        x = evaluate(spec, a * x)
    return x if np.ndim(x) else float(x)


def steps_to_reach(spec: ActivationSpec, alpha: float, x0: float, delta: float) -> int:
    """Smallest r with the r-fold iterate of phi_alpha at x0 >= delta."""
    x = x0
    for r in range(1, MAX_R_STEPS + 1):
        x = evaluate(spec, alpha * x)
        if x >= delta:
            return r
    raise NoSuchR(f"phi_alpha never reached {delta} within {MAX_R_STEPS} steps")


@dataclass(frozen=True)
class FloorEstimate:
    empirical_prob: float
    bound: float
    r: int
    trials: int

    @property
    def std_error(self) -> float:
        p = self.empirical_prob
        return math.sqrt(p * (1 - p) / self.trials)


def stochastic_floor_probability(
    spec: ActivationSpec,
    sigma: float,
    m: int,
    x0: float,
    delta: float,
    alpha: float,
    trials: int = 10_000,
    seed: int = 0,
) -> FloorEstimate:
    """Monte-Carlo P(Phi_m(x0) >= delta) for gains ~ N(omega, sigma^2), with the
    lower bound (1 - Phi((alpha - omega)/sigma))^r.

    Trial ``t`` draws its m gains from substream (seed, TRIAL, t).
    """
    w = omega(spec)
    if not alpha > w:
        raise DomainError("alpha must exceed omega")
    xi = solve_xi(spec, alpha).xi_a
    if not (0 < x0 < delta < xi):
        raise DomainError(f"need 0 < x0 < delta < xi_alpha = {xi}")
    if m < 1 or trials < 1:
        raise DomainError("m and trials must be positive")
    r = steps_to_reach(spec, alpha, x0, delta)
    bound = (1.0 - norm_cdf((alpha - w) / sigma)) ** r

    gains = np.empty((m, trials))
    for t in range(trials):
        gains[:, t] = _rng.substream(seed, _rng.TRIAL, t).normal(w, sigma, size=m)
    final = compose_varying(spec, gains, np.full(trials, float(x0)))
    prob = float(np.mean(final >= delta))
    return FloorEstimate(prob, bound, r, trials)


def bifurcation_scan(spec: ActivationSpec, a_values, x0: float, n: int):
    """Rows (a, x_n, xi_a) for each gain."""
    rows = []
    for a in a_values:
        trace = iterate(spec, a, x0, n)
        rows.append((float(a), trace.converged_to, solve_xi(spec, a).xi_a))
    return rows
