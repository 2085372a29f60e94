"""Synthetic regressions with AR(1) errors and optional Student-t tails.

    y_t = x_t' beta + u_t,   u_t = phi u_{t-1} + e_t

Covariate and innovation laws by ``dgp``:

=========  ===========  ===========
dgp        x_t          e_t
=========  ===========  ===========
gaussian   N(0, 1)      N(0, 1)
dgp1       N(0, 1)      t_df
dgp2       t_df         t_df
dgp3       t_df         N(0, 1)
=========  ===========  ===========
"""

from __future__ import annotations

import itertools
import json
import zlib
from dataclasses import asdict, dataclass, fields
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .dataset import Dataset

DGPS = ("gaussian", "dgp1", "dgp2", "dgp3")
_LAWS = {
    "gaussian": ("normal", "normal"),
    "dgp1": ("normal", "t"),
    "dgp2": ("t", "t"),
    "dgp3": ("t", "normal"),
}
RNG_NAME = "numpy.PCG64"


@dataclass(frozen=True)
class SimConfig:
    T: int
    p: int
    s0: int = 3
    phi: float = 0.0
    dgp: str = "gaussian"
    df: int | None = None
    burn_in: int = 100
    seed: int = 0
    reps: int = 1
    # rescale t draws to unit variance (off by default; needs df > 2)
    standardize_t: bool = False

    def __post_init__(self):
        if self.T < 2 or self.p < 1:
            raise ValueError(f"need T >= 2 and p >= 1, got T={self.T}, p={self.p}")
        if not 0 <= self.s0 <= self.p:
            raise ValueError(f"s0 must lie in [0, p], got {self.s0}")
        if not abs(self.phi) < 1:
            raise ValueError(f"|phi| must be below 1, got {self.phi}")
        if self.dgp not in DGPS:
            raise ValueError(f"unknown dgp {self.dgp!r}; expected one of {DGPS}")
        if (self.df is None) != (self.dgp == "gaussian"):
            raise ValueError("df is required for t-based dgps and not allowed for gaussian")
        if self.df is not None and self.df <= 0:
            raise ValueError("df must be positive")
        if self.standardize_t and self.df is not None and self.df <= 2:
            raise ValueError("cannot standardise t draws with df <= 2")
        if self.burn_in < 0 or self.reps < 1:
            raise ValueError("burn_in must be >= 0 and reps >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)

    def cell_key(self) -> dict:
        """Fields that identify the design (seed and replication count excluded)."""
        d = self.to_dict()
        for k in ("seed", "reps"):
            d.pop(k)
        return d

    @property
    def cell_id(self) -> int:
        blob = json.dumps(self.cell_key(), sort_keys=True).encode()
        return zlib.crc32(blob)


def expand_grid(doc: dict | list) -> list[SimConfig]:
    """Configs from a JSON document.

    Accepts a single config, a list of configs, or ``{"cells": [...]}``.
    Within one config, list-valued T, p, s0, phi, dgp or df expand to their
    Cartesian product.
    """
    if isinstance(doc, dict) and "cells" in doc:
        doc = doc["cells"]
    items = doc if isinstance(doc, list) else [doc]
    out = []
    for item in items:
        if not isinstance(item, dict):
            raise ValueError("each config must be a JSON object")
        keys = [k for k, v in item.items() if isinstance(v, list)]
        for combo in itertools.product(*(item[k] for k in keys)):
            d = dict(item)
            d.update(zip(keys, combo))
            out.append(SimConfig.from_dict(d))
    return out


def replication_rng(seed: int, cell_id: int, rep: int) -> np.random.Generator:
    """Independent stream per (seed, cell, replication)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(cell_id, rep))
    return np.random.Generator(np.random.PCG64(ss))


def _sampler(law: str, df: int | None, standardize: bool) -> Callable:
    if law == "normal":
        return lambda rng, size: rng.standard_normal(size)
    scale = np.sqrt((df - 2) / df) if standardize else 1.0
    return lambda rng, size: rng.standard_t(df, size) * scale


def simulate_ar_errors(
    phi: float,
    T: int,
    innovation: str | Callable = "normal",
    burn_in: int = 100,
    rng: np.random.Generator | None = None,
    df: int | None = None,
) -> np.ndarray:
    """AR(1) path of length T started at zero after ``burn_in`` discarded steps.

    ``innovation`` is ``"normal"``, ``"t"`` (needs ``df``) or a callable
    ``(rng, size) -> draws``.
    """
    if not abs(phi) < 1:
        raise ValueError(f"|phi| must be below 1, got {phi}")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    if rng is None:
        rng = np.random.default_rng()
    if callable(innovation):
        draw = innovation
    elif innovation == "t":
        if df is None:
            raise ValueError("t innovations need df")
        draw = _sampler("t", df, False)
    elif innovation == "normal":
        draw = _sampler("normal", None, False)
    else:
        raise ValueError(f"unknown innovation {innovation!r}")
    e = np.asarray(draw(rng, burn_in + T), dtype=float)
    return lfilter([1.0], [1.0, -phi], e)[burn_in:]


@dataclass
class SimulatedDataset:
    dataset: Dataset
    beta_true: np.ndarray
    active_set: np.ndarray
    errors: np.ndarray


def simulate_dataset(config: SimConfig, rng: np.random.Generator) -> SimulatedDataset:
    """Draw X, then the support and values of beta, then the AR errors."""
    x_law, e_law = _LAWS[config.dgp]
    X = _sampler(x_law, config.df, config.standardize_t)(rng, (config.T, config.p))
    support = np.sort(rng.choice(config.p, size=config.s0, replace=False))
    beta = np.zeros(config.p)
    beta[support] = rng.uniform(0.0, 1.0, size=config.s0)
    u = simulate_ar_errors(
        config.phi, config.T, _sampler(e_law, config.df, config.standardize_t),
        config.burn_in, rng,
    )
    return SimulatedDataset(Dataset(X @ beta + u, X), beta, support, u)


def simulate_replication(config: SimConfig, rep: int) -> SimulatedDataset:
    return simulate_dataset(config, replication_rng(config.seed, config.cell_id, rep))
