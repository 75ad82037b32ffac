"""Forward-signal simulators and the spread metric."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .activations import ActivationSpec, evaluate, omega, supremum_bound
from .calibration import sigma_star
from .errors import DomainError, EmptyInput
from .initializers import PROPOSED, InitScheme, entry_variance, layer_weights

DEFAULT_BINS = 50


@dataclass(frozen=True)
class PositiveConstant:
    value: float = 0.1

    def draw(self, width, gen):
        return np.full(width, float(self.value))


@dataclass(frozen=True)
class UniformSym:
    half_range: float = 1.0

    def draw(self, width, gen):
        return gen.uniform(-self.half_range, self.half_range, size=width)


@dataclass
class PropagationTrace:
    depth_L: int
    width: int
    negative_rate_per_depth: np.ndarray
    last_layer_values: np.ndarray
    spread: float
    value_range: tuple[float, float]
    bins: int = DEFAULT_BINS

    def histogram(self):
        return clamped_histogram(self.last_layer_values, self.bins, self.value_range)


def clamped_histogram(values, bins, value_range):
    lo, hi = value_range
    v = np.clip(np.asarray(values, dtype=float), lo, hi)
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    return counts, edges


def spread_metric(values, bins: int = DEFAULT_BINS, value_range=(-1.0, 1.0)) -> float:
    """Normalised histogram entropy in [0, 1]; out-of-range values go to the end bins."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise EmptyInput("spread of an empty sample")
    if bins < 2:
        raise DomainError("need at least two bins")
    lo, hi = value_range
    if not lo < hi:
        raise DomainError("empty histogram range")
    counts, _ = clamped_histogram(values, bins, (lo, hi))
    p = counts[counts > 0] / values.size
    h = -float(np.sum(p * np.log(p)))
    return max(0.0, h / math.log(bins))


def _default_range(spec):
    s = supremum_bound(spec)
    return (-s, s)


def scalar_chain(spec: ActivationSpec, sigma: float, depth: int, n_chains: int,
                 x0: float = 0.1, seed: int = 0, bins: int = DEFAULT_BINS) -> PropagationTrace:
    """n_chains independent X_j = f(A_j X_{j-1}) with A_j ~ N(omega, sigma^2).

    Depth j's gains for all chains come from substream (seed, SCALAR_CHAIN, j).
    """
    if depth < 1 or n_chains < 1:
        raise DomainError("depth and n_chains must be positive")
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    w = omega(spec)
    x = np.full(n_chains, float(x0))
    neg = np.empty(depth)
    for j in range(1, depth + 1):
        gen = _rng.substream(seed, _rng.SCALAR_CHAIN, j)
        a = w + sigma * gen.standard_normal(n_chains)
        x = evaluate(spec, a * x)
        neg[j - 1] = np.count_nonzero(x < 0) / n_chains
    rng_ = _default_range(spec)
    return PropagationTrace(depth, 1, neg, x, spread_metric(x, bins, rng_), rng_, bins)


def _preactivation_marginal(scheme: InitScheme, x, layer):
    """Draw W x for a fresh Gaussian-scheme matrix W straight from its law.

    Row i of W x is  mean_i . x + N(0, var * ||x||^2), independent over i, so
    an n-vector of normals replaces n^2 of them.
    """
    n = x.size
    gen = _rng.substream(scheme.seed, _rng.LAYER, layer)
    sd = math.sqrt(entry_variance(scheme, n, n)) * float(np.linalg.norm(x))
    noise = sd * gen.standard_normal(n)
    if scheme.kind == PROPOSED:
        return scheme.omega * x + noise
    return noise


def ffnn_chain(spec: ActivationSpec, scheme: InitScheme, width: int, depth: int,
               x0_dist=PositiveConstant(0.1), seed: int | None = None, method: str = "auto",
               bins: int = DEFAULT_BINS, value_range=None) -> PropagationTrace:
    """Propagate one input through ``depth`` fresh width x width layers, no bias.

    ``method="dense"`` materialises every matrix; ``"marginal"`` (Gaussian
    schemes only) samples W x from its exact conditional law, which is what
    ``"auto"`` picks whenever it applies.  ``seed`` overrides ``scheme.seed``.
    """
    if width < 1 or depth < 1:
        raise DomainError("width and depth must be positive")
    if seed is not None:
        scheme = InitScheme(scheme.kind, seed, scheme.sigma_star, scheme.omega)
    if method == "auto":
        method = "marginal" if scheme.gaussian else "dense"
    if method == "marginal" and not scheme.gaussian:
        raise DomainError(f"marginal sampling needs a Gaussian scheme, not {scheme.kind}")
    if method not in ("marginal", "dense"):
        raise DomainError(f"unknown method {method!r}")

    x = x0_dist.draw(width, _rng.substream(scheme.seed, _rng.INPUT))
    neg = np.empty(depth)
    for layer in range(1, depth + 1):
        if method == "marginal":
            pre = _preactivation_marginal(scheme, x, layer)
        else:
            pre = layer_weights(scheme, width, width, layer) @ x
        x = evaluate(spec, pre)
        neg[layer - 1] = np.count_nonzero(x < 0) / width
    value_range = value_range or _default_range(spec)
    return PropagationTrace(depth, width, neg, x, spread_metric(x, bins, value_range),
                            tuple(value_range), bins)


def spread_vs_p_sweep(spec: ActivationSpec, depth: int, width: int, p_grid, bins=DEFAULT_BINS,
                      seed=0, x0_dist=PositiveConstant(0.1), method="auto"):
    """Rows (p, sigma_star, spread) for proposed-init chains calibrated at each p."""
    w = omega(spec)
    rows = []
    for p in p_grid:
        if not 0 <= p <= 0.49:
            raise DomainError("p must lie in [0, 0.49]")
        s = sigma_star(p, depth, w)
        trace = ffnn_chain(spec, InitScheme.proposed(s, w, seed), width, depth, x0_dist,
                           method=method, bins=bins)
        rows.append((float(p), s, trace.spread))
    return rows

