"""Odd-sigmoid activation catalog.

An :class:`ActivationSpec` is an immutable description of ``f(alpha * x)``
where ``f`` is a catalog member or a nonnegative combination of specs.
Everything here is vectorised over numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGrid
from .special import erf

TANH = "tanh"
ERF = "erf"
ARCTAN = "arctan"
ARCTAN_NORMALIZED = "arctann"
GD = "gd"
SOFTSIGN = "softsign"
SOFTSIGN_1_PLUS_3 = "softsign13"
COMBINATION = "sum"

KINDS = (TANH, ERF, ARCTAN, ARCTAN_NORMALIZED, GD, SOFTSIGN, SOFTSIGN_1_PLUS_3, COMBINATION)

_TWO_OVER_PI = 2.0 / math.pi
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


@dataclass(frozen=True)
class ActivationSpec:
    kind: str
    input_scale: float = 1.0
    k: float = 1.0  # softsign exponent, ignored by other kinds
    terms: tuple[tuple[float, "ActivationSpec"], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if not (self.input_scale > 0 and math.isfinite(self.input_scale)):
            raise ValueError("input_scale must be a positive finite number")
        if self.kind == SOFTSIGN and not self.k >= 1:
            raise ValueError("softsign exponent k must be >= 1")
        if self.kind == COMBINATION:
            if not self.terms:
                raise ValueError("a combination needs at least one term")
            coefs = [c for c, _ in self.terms]
            if any(not (c >= 0 and math.isfinite(c)) for c in coefs) or not any(c > 0 for c in coefs):
                raise ValueError("combination coefficients must be >= 0 with at least one > 0")
            object.__setattr__(self, "terms", tuple((float(c), s) for c, s in self.terms))
        elif self.terms:
            raise ValueError("only combinations carry terms")

    def __str__(self):
        return format_spec(self)

    def scaled(self, alpha: float) -> "ActivationSpec":
        """Return the spec of ``x -> f(alpha * x)``."""
        return ActivationSpec(self.kind, self.input_scale * alpha, self.k, self.terms)


def tanh(scale=1.0):
    return ActivationSpec(TANH, scale)


def erf_(scale=1.0):
    return ActivationSpec(ERF, scale)


def arctan(scale=1.0, normalized=False):
    return ActivationSpec(ARCTAN_NORMALIZED if normalized else ARCTAN, scale)


def gd(scale=1.0):
    return ActivationSpec(GD, scale)


def softsign(k=1.0, scale=1.0):
    return ActivationSpec(SOFTSIGN, scale, k=float(k))


def combination(*terms, scale=1.0):
    """``combination((1, tanh()), (2, gd()))`` -> ``tanh + 2 gd``."""
    return ActivationSpec(COMBINATION, scale, terms=tuple(terms))


def paper_mixture(a, b, c, d):
    """tanh(a x) + erf(b x) + softsign_1(c x) + gd(d x).

    The slope at zero is a + 2b/sqrt(pi) + c + d.
    """
    return combination((1.0, tanh(a)), (1.0, erf_(b)), (1.0, softsign(1, c)), (1.0, gd(d)))


CATALOG = {
    "tanh": tanh(),
    "erf": erf_(),
    "arctan": arctan(),
    "arctann": arctan(normalized=True),
    "gd": gd(),
    "softsign1": softsign(1),
    "softsign2": softsign(2),
    "softsign3": softsign(3),
    "softsign13": ActivationSpec(SOFTSIGN_1_PLUS_3),
}


# --- base functions, evaluated at u = alpha * x ----------------------------

def _softsign(u, k):
    t = np.abs(u)
    inner = t <= 1.0
    with np.errstate(divide="ignore", over="ignore"):
        w = np.where(inner, t, 1.0 / np.where(t == 0, 1.0, t)) ** k
    denom = (1.0 + w) ** (1.0 / k)
    return np.where(inner, u / denom, np.sign(u) / denom)


def _softsign_prime(u, k):
    t = np.abs(u)
    inner = t <= 1.0
    with np.errstate(divide="ignore", over="ignore"):
        w = np.where(inner, t, 1.0 / np.where(t == 0, 1.0, t)) ** k
        base = (1.0 + w) ** (-(k + 1.0) / k)
        outer = np.maximum(t, 1.0) ** (-(k + 1.0))
    return np.where(inner, base, base * outer)


def _sech(u):
    e = np.exp(-np.abs(u))
    return 2.0 * e / (1.0 + e * e)


def _base_eval(spec: ActivationSpec, u):
    kind = spec.kind
    if kind == TANH:
        return np.tanh(u)
    if kind == ERF:
        return erf(u)
    if kind == ARCTAN:
        return np.arctan(u)
    if kind == ARCTAN_NORMALIZED:
        return _TWO_OVER_PI * np.arctan(u)
    if kind == GD:
        return 2.0 * np.arctan(np.tanh(0.5 * u))
    if kind == SOFTSIGN:
        return _softsign(u, spec.k)
    if kind == SOFTSIGN_1_PLUS_3:
        return _softsign(u, 1.0) + _softsign(u, 3.0)
    out = 0.0
    for c, sub in spec.terms:
        out = out + c * evaluate(sub, u)
    return out


def _base_deriv(spec: ActivationSpec, u):
    with np.errstate(over="ignore"):  # u*u -> inf gives the right limit
        return _base_deriv_raw(spec, u)


def _base_deriv_raw(spec: ActivationSpec, u):
    kind = spec.kind
    if kind == TANH:
        s = _sech(u)
        return s * s
    if kind == ERF:
        return _TWO_OVER_SQRT_PI * np.exp(-u * u)
    if kind == ARCTAN:
        return 1.0 / (1.0 + u * u)
    if kind == ARCTAN_NORMALIZED:
        return _TWO_OVER_PI / (1.0 + u * u)
    if kind == GD:
        return _sech(u)
    if kind == SOFTSIGN:
        return _softsign_prime(u, spec.k)
    if kind == SOFTSIGN_1_PLUS_3:
        return _softsign_prime(u, 1.0) + _softsign_prime(u, 3.0)
    out = 0.0
    for c, sub in spec.terms:
        out = out + c * derivative(sub, u)
    return out


def evaluate(spec: ActivationSpec, x):
    """f(alpha x); returns a float for scalar input, an array otherwise."""
    u = spec.input_scale * np.asarray(x, dtype=float)
    out = np.asarray(_base_eval(spec, u), dtype=float)
    return out if out.ndim else float(out)


def derivative(spec: ActivationSpec, x):
    """d/dx f(alpha x) = alpha f'(alpha x)."""
    u = spec.input_scale * np.asarray(x, dtype=float)
    out = spec.input_scale * np.asarray(_base_deriv(spec, u), dtype=float)
    return out if out.ndim else float(out)


def omega(spec: ActivationSpec) -> float:
    """Critical gain 1 / f'(0)."""
    return 1.0 / derivative(spec, 0.0)


def omega_harmonic(spec: ActivationSpec) -> float:
    """omega via 1/omega_g = sum_j c_j / omega_j (recursing through combinations)."""
    if spec.kind != COMBINATION:
        return omega(spec)
    inv = sum(c / omega_harmonic(sub) for c, sub in spec.terms)
    return 1.0 / (spec.input_scale * inv)


_SUP = {
    TANH: 1.0,
    ERF: 1.0,
    ARCTAN: math.pi / 2,
    ARCTAN_NORMALIZED: 1.0,
    GD: math.pi / 2,
    SOFTSIGN: 1.0,
    SOFTSIGN_1_PLUS_3: 2.0,
}


def supremum_bound(spec: ActivationSpec) -> float:
    """sup |f|, analytic per kind; input scaling does not change it."""
    if spec.kind == COMBINATION:
        return sum(c * supremum_bound(sub) for c, sub in spec.terms)
    return _SUP[spec.kind]


# --- class-membership checker ----------------------------------------------

ODD_TOL = 1e-12
TIE_TOL = 1e-14
UNDERFLOW_SLOPE = 1e-250


def _positive_until_underflow(d):
    """f' > 0 along increasing |x|, except once it has decayed into underflow.

    erf' = exp(-x^2) hits exactly 0.0 near x = 27; a hard clip drops from 1 to
    0 in one step and must fail.
    """
    if np.any(d < 0):
        return False
    zero = d == 0
    if not zero.any():
        return True
    first = int(np.argmax(zero))
    return first > 0 and bool(np.all(d[first - 1:] < UNDERFLOW_SLOPE))


@dataclass(frozen=True)
class ClassReport:
    odd_symmetry: bool
    bounded: bool
    increasing: bool
    slope_decay: bool
    sup_est: float
    max_odd_defect: float
    slope_at_max: float
    slope_at_zero: float

    @property
    def slope_vanishes(self) -> bool:
        """Tail trend f'(X_max) < f'(0) (a finite grid cannot show the limit itself)."""
        return self.slope_at_max < self.slope_at_zero

    @property
    def passed(self) -> bool:
        return self.odd_symmetry and self.bounded and self.increasing and self.slope_decay


def default_grid(x_max=50.0, n=2001):
    return np.linspace(0.0, x_max, n)


def check_functions(f, df, grid, sup_bound=None) -> ClassReport:
    """Numerically falsify odd-sigmoid membership of ``f`` with derivative ``df``.

    ``grid`` holds nonnegative, strictly increasing sample points; their
    mirror images are added automatically.  When ``sup_bound`` is None the
    boundedness check falls back to a tail-increment test.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise InvalidGrid("grid needs at least two points")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise InvalidGrid("grid must be nonnegative and strictly increasing")

    fp, fn = np.asarray(f(grid), float), np.asarray(f(-grid), float)
    dp, dn = np.asarray(df(grid), float), np.asarray(df(-grid), float)
    values = np.concatenate([fn, fp])
    slopes = np.concatenate([dn, dp])

    odd_defect = float(np.max(np.abs(fp + fn)))
    odd_ok = odd_defect <= ODD_TOL

    sup_est = float(np.max(np.abs(values)))
    finite = bool(np.all(np.isfinite(values)))
    if sup_bound is not None:
        bounded = finite and sup_est <= sup_bound * (1 + 1e-12)
    else:
        mid = np.searchsorted(grid, grid[-1] / 2)
        head = fp[mid] - fp[0]
        tail = fp[-1] - fp[mid]
        bounded = finite and tail <= 0.5 * head

    increasing = _positive_until_underflow(dp) and _positive_until_underflow(dn)
    steps = np.diff(dp)
    decay = bool(np.all((steps < 0) | (np.abs(steps) <= TIE_TOL)))
    # strictness: a perfectly flat derivative is not decaying
    decay = decay and bool(dp[-1] < dp[0])

    return ClassReport(
        odd_symmetry=odd_ok,
        bounded=bounded,
        increasing=increasing,
        slope_decay=decay,
        sup_est=sup_est,
        max_odd_defect=odd_defect,
        slope_at_max=float(dp[-1]),
        slope_at_zero=float(dp[0]),
    )


def check_odd_sigmoid(spec: ActivationSpec, grid=None) -> ClassReport:
    if grid is None:
        grid = default_grid()
    return check_functions(
        lambda x: evaluate(spec, x),
        lambda x: derivative(spec, x),
        grid,
        sup_bound=supremum_bound(spec),
    )


# --- string grammar ---------------------------------------------------------
#
#   spec    := name | "softsign:" NUM | "scale:" NUM ":" spec | "sum:" terms
#              | "(" spec ")"
#   name    := tanh | erf | arctan | arctann | gd | softsign13
#   terms   := term ("+" term)*
#   term    := NUM "*" spec
#
# A nested "sum:" inside a term must be parenthesised.

_NUM = re.compile(r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?")
_NAMES = {"tanh", "erf", "arctan", "arctann", "gd", "softsign13"}


class _Parser:
    def __init__(self, text):
        self.s = text.replace(" ", "")
        self.i = 0

    def fail(self, msg):
        raise ValueError(f"bad activation spec {self.s!r} at {self.i}: {msg}")

    def peek(self, lit):
        return self.s.startswith(lit, self.i)

    def take(self, lit):
        if not self.peek(lit):
            self.fail(f"expected {lit!r}")
        self.i += len(lit)

    def number(self):
        m = _NUM.match(self.s, self.i)
        if not m:
            self.fail("expected a number")
        self.i = m.end()
        return float(m.group())

    def spec(self):
        if self.peek("("):
            self.take("(")
            out = self.spec()
            self.take(")")
            return out
        if self.peek("scale:"):
            self.take("scale:")
            alpha = self.number()
            self.take(":")
            return self.spec().scaled(alpha)
        if self.peek("sum:"):
            self.take("sum:")
            terms = [self.term()]
            while self.peek("+"):
                self.take("+")
                terms.append(self.term())
            return combination(*terms)
        if self.peek("softsign:"):
            self.take("softsign:")
            return softsign(self.number())
        m = re.compile(r"[a-z0-9]+").match(self.s, self.i)
        word = m.group() if m else ""
        if word not in _NAMES:
            self.fail(f"unknown activation {word!r}")
        self.i = m.end()
        if word == "softsign13":
            return ActivationSpec(SOFTSIGN_1_PLUS_3)
        return ActivationSpec(word)

    def term(self):
        c = self.number()
        self.take("*")
        return (c, self.spec())


def parse_spec(text: str) -> ActivationSpec:
    """Parse the CLI activation grammar (see module comment)."""
    p = _Parser(text)
    out = p.spec()
    if p.i != len(p.s):
        p.fail("trailing input")
    return out


def format_spec(spec: ActivationSpec) -> str:
    if spec.kind == SOFTSIGN:
        core = f"softsign:{spec.k!r}"
    elif spec.kind == COMBINATION:
        parts = []
        for c, sub in spec.terms:
            s = format_spec(sub)
            parts.append(f"{c!r}*({s})" if s.startswith("sum:") else f"{c!r}*{s}")
        core = "sum:" + "+".join(parts)
    else:
        core = spec.kind
    if spec.input_scale != 1.0:
        inner = f"({core})" if spec.kind == COMBINATION else core
        return f"scale:{spec.input_scale!r}:{inner}"
    return core
