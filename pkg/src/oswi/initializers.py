"""Weight initializers: proposed D+Z scheme and the usual baselines."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as _rng
from .errors import DomainError, ZeroCoordinate

PROPOSED = "proposed"
XAVIER = "xavier"
HE = "he"
ORTHOGONAL = "orthogonal"
SCHEMES = (PROPOSED, XAVIER, HE, ORTHOGONAL)


@dataclass(frozen=True)
class InitScheme:
    kind: str
    seed: int = 0
    sigma_star: float = 0.0
    omega: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown init scheme {self.kind!r}")
        if self.kind == PROPOSED and not (self.sigma_star >= 0 and self.omega > 0):
            raise ValueError("proposed init needs sigma_star >= 0 and omega > 0")

    @classmethod
    def proposed(cls, sigma_star, omega, seed=0):
        return cls(PROPOSED, seed, float(sigma_star), float(omega))

    @property
    def gaussian(self) -> bool:
        """True when W = mean + i.i.d. Gaussian noise (enables exact marginal sampling)."""
        return self.kind in (PROPOSED, HE)


def mod_diagonal(rows: int, cols: int, value: float = 1.0) -> np.ndarray:
    """Matrix with ``value`` at (i, i mod cols) and zeros elsewhere."""
    d = np.zeros((rows, cols))
    d[np.arange(rows), np.arange(rows) % cols] = value
    return d


def orthogonal(rows: int, cols: int, gen: np.random.Generator, gain: float = 1.0) -> np.ndarray:
    flip = rows < cols
    a = gen.standard_normal((cols, rows) if flip else (rows, cols))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if flip:
        q = q.T
    return gain * q


def init_layer(scheme: InitScheme, rows: int, cols: int, gen: np.random.Generator) -> np.ndarray:
    """Weight matrix of shape (rows, cols) = (fan_out, fan_in)."""
    if rows < 1 or cols < 1:
        raise DomainError("matrix dimensions must be positive")
    kind = scheme.kind
    if kind == PROPOSED:
        w = mod_diagonal(rows, cols, scheme.omega)
        if scheme.sigma_star > 0:
            w += gen.normal(0.0, scheme.sigma_star / math.sqrt(cols), size=(rows, cols))
        return w
    if kind == XAVIER:
        bound = math.sqrt(6.0 / (rows + cols))
        return gen.uniform(-bound, bound, size=(rows, cols))
    if kind == HE:
        return gen.normal(0.0, math.sqrt(2.0 / cols), size=(rows, cols))
    return orthogonal(rows, cols, gen)


def layer_weights(scheme: InitScheme, rows: int, cols: int, layer: int) -> np.ndarray:
    """Layer ``layer`` drawn from its own substream (scheme.seed, LAYER, layer)."""
    return init_layer(scheme, rows, cols, _rng.substream(scheme.seed, _rng.LAYER, layer))


def entry_variance(scheme: InitScheme, rows: int, cols: int) -> float:
    """Variance of the random part of a single weight entry."""
    if scheme.kind == PROPOSED:
        return scheme.sigma_star**2 / cols
    if scheme.kind == XAVIER:
        return 2.0 / (rows + cols)
    if scheme.kind == HE:
        return 2.0 / cols
    return 1.0 / max(rows, cols)


@dataclass(frozen=True)
class GainStats:
    mean_hat: float
    var_hat: float
    var_floor: float
    var_theory: float
    samples: int

    @property
    def mean_std_error(self) -> float:
        return math.sqrt(self.var_hat / self.samples)


def effective_gain(w: np.ndarray, x: np.ndarray, i: int) -> float:
    """a_i = (W x)_i / x_i, the self-scaling factor of coordinate i."""
    if x[i] == 0:
        raise ZeroCoordinate(f"x[{i}] is zero")
    return float(w[i] @ x / x[i])


def gain_statistics(scheme: InitScheme, width: int, x_prev, i: int, samples: int,
                    gen: np.random.Generator) -> GainStats:
    """Empirical law of a_i over independent proposed-init matrices.

    Only row i of each matrix enters a_i, so each sample draws that row alone;
    the law is the same as drawing the full matrix.
    """
    if scheme.kind != PROPOSED:
        raise ValueError("gain statistics are defined for the proposed scheme")
    x = np.asarray(x_prev, dtype=float)
    if x.shape != (width,):
        raise ValueError("x_prev must have length `width`")
    if x[i] == 0:
        raise ZeroCoordinate(f"x_prev[{i}] is zero")
    sd = scheme.sigma_star / math.sqrt(width)
    z = gen.normal(0.0, sd, size=(samples, width))
    diag = np.zeros(width)
    diag[i % width] = scheme.omega
    a = (z @ x + diag @ x) / x[i]
    floor = scheme.sigma_star**2 / width
    ratio_sq = float(np.sum((x / x[i]) ** 2)) - 1.0
    return GainStats(
        mean_hat=float(a.mean()),
        var_hat=float(a.var(ddof=1)),
        var_floor=floor,
        var_theory=floor * (1.0 + ratio_sq),
        samples=samples,
    )


# --- OSWI binary container ----------------------------------------------------
#
# header: b"OSWI", u32 version, u32 rows, u32 cols   (little endian)
# body:   rows*cols float64, little endian, row-major

MAGIC = b"OSWI"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def pack_matrix(w) -> bytes:
    w = np.asarray(w, dtype="<f8")
    if w.ndim == 1:
        w = w[:, None]
    rows, cols = w.shape
    return _HEADER.pack(MAGIC, VERSION, rows, cols) + np.ascontiguousarray(w).tobytes()


def unpack_matrices(buf: bytes) -> list[np.ndarray]:
    out = []
    pos = 0
    while pos < len(buf):
        if len(buf) - pos < _HEADER.size:
            raise ValueError("truncated OSWI header")
        magic, version, rows, cols = _HEADER.unpack_from(buf, pos)
        if magic != MAGIC:
            raise ValueError(f"bad OSWI magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"unsupported OSWI version {version}")
        pos += _HEADER.size
        n = rows * cols * 8
        if len(buf) - pos < n:
            raise ValueError("truncated OSWI body")
        out.append(np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=pos)
                   .reshape(rows, cols).astype(float))
        pos += n
    return out


def write_weights(path, matrices) -> None:
    Path(path).write_bytes(b"".join(pack_matrix(w) for w in matrices))


def read_weights(path) -> list[np.ndarray]:
    return unpack_matrices(Path(path).read_bytes())
