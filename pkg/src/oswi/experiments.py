"""Training drivers shared by the CLI and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

from .activations import omega, tanh
from .data import Dataset, split_validation, subset
from .initializers import SCHEMES
from .network import TrainConfig, mlp_config, train

DESK_WIDTH = 128
DESK_HIDDEN = 10
PAPER_WIDTH = 512
PAPER_HIDDEN = 20


def lr_grid(lo: int = -9, hi: int = 0):
    """Decade grid 10^lo ... 10^hi."""
    return [10.0**k for k in range(lo, hi + 1)]


def prepare(dataset: Dataset, n: int | None, seed: int, val_fraction: float = 0.15,
            val_set: Dataset | None = None):
    """Subset then split; an explicit ``val_set`` replaces the held-out split."""
    data = subset(dataset, n, seed) if n is not None else dataset
    if val_set is not None:
        return data, val_set
    return split_validation(data, val_fraction, seed)


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    omega: float
    init: str
    lr: float
    val_acc: float
    learned: bool


def sweep_lr(dataset: Dataset, alphas, inits=SCHEMES, lrs=None, n=1000, n_hidden=DESK_HIDDEN,
             width=DESK_WIDTH, epochs=1, seed=0, p=0.3, base=None, val_set=None):
    """One training run per (alpha, init, lr) on tanh(alpha x) or ``base`` scaled by alpha."""
    lrs = lr_grid() if lrs is None else list(lrs)
    base = base or tanh()
    train_set, val = prepare(dataset, n, seed, val_set=val_set)
    rows = []
    for alpha in alphas:
        spec = base.scaled(alpha)
        for kind in inits:
            cfg = mlp_config(spec, kind, n_hidden, width, n_in=train_set.images.shape[1], p=p,
                             seed=seed)
            for lr in lrs:
                rep = train(cfg, TrainConfig(lr=lr, epochs=epochs), train_set, val)
                rows.append(SweepRow(float(alpha), omega(spec), kind, lr,
                                     rep.best_val_acc, rep.learned))
    return rows


def learnable_window(rows, alpha, init):
    """(lowest, highest) learnable LR for one (alpha, init) cell, or None."""
    lrs = [r.lr for r in rows if r.alpha == alpha and r.init == init and r.learned]
    return (min(lrs), max(lrs)) if lrs else None


def compare_inits(dataset: Dataset, spec, inits=SCHEMES, seeds=(0, 1, 2), n=500, lr=1e-3,
                  epochs=10, n_hidden=DESK_HIDDEN, width=DESK_WIDTH, p=0.3, val_set=None):
    """best_val_acc[init][seed] for each initialization."""
    out = {k: [] for k in inits}
    for seed in seeds:
        train_set, val = prepare(dataset, n, seed, val_set=val_set)
        for kind in inits:
            cfg = mlp_config(spec, kind, n_hidden, width, n_in=train_set.images.shape[1], p=p,
                             seed=seed)
            out[kind].append(train(cfg, TrainConfig(lr=lr, epochs=epochs), train_set, val)
                             .best_val_acc)
    return out
