"""Small shared helpers: angle wrapping, dB math, named deterministic RNG streams."""

from __future__ import annotations

import hashlib

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    w = np.pi - np.remainder(np.pi - np.asarray(a), 2.0 * np.pi)
    if np.ndim(a) == 0:
        return float(w)
    return w


def db_to_lin(db):
    return 10.0 ** (np.asarray(db) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(x)


def watts_to_dbm(p_w: float) -> float:
    return 10.0 * np.log10(p_w * 1e3)


def rng_for(seed: int, *labels) -> np.random.Generator:
    """Independent generator for (seed, labels).

    Every stochastic draw in a run is obtained through a label so that
    reruns are bit-identical and streams do not alias across subsystems.
    Labels are hashed with sha256 (stable across processes, unlike hash()).
    """
    tag = "/".join(str(l) for l in labels).encode()
    digest = hashlib.sha256(tag).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *words]))


def fmt_g(x) -> str:
    """Float formatting used for all CSV output (deterministic, compact)."""
    return format(float(x), ".10g")
