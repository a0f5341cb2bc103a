"""Uniform planar arrays and beam codebooks.

Idealized separable array-factor patterns at half-wavelength spacing; no
element pattern or mutual coupling.  Directions and steering angles are in
the array's local frame (boresight = azimuth 0, elevation 0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .util import wrap_angle


@dataclass(frozen=True)
class Upa:
    n_rows: int
    n_cols: int
    element_spacing: float = 0.5  # wavelengths

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("array needs at least one element per axis")

    @property
    def n_elements(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def boresight_gain_dbi(self) -> float:
        return 10.0 * math.log10(self.n_elements)


@dataclass(frozen=True)
class BeamCodebook:
    upa: Upa
    beams: tuple                # ((azimuth, elevation), ...) local-frame steering
    owner: str                  # "trp" | "device"

    def __len__(self) -> int:
        return len(self.beams)

    @property
    def steering_az(self) -> np.ndarray:
        return np.array([b[0] for b in self.beams])

    @property
    def steering_el(self) -> np.ndarray:
        return np.array([b[1] for b in self.beams])


def _af_ratio(n: int, delta_psi) -> np.ndarray:
    """|sin(n psi/2) / (n sin(psi/2))| with psi wrapped to one period."""
    x = wrap_angle(delta_psi) / (2.0 * np.pi)
    return np.abs(np.sinc(n * np.asarray(x)) / np.sinc(x))


def array_gain_dbi(upa: Upa, steering, direction, floor_rel_db: float = 40.0):
    """Gain toward `direction` of a beam steered to `steering` (both (az, el), rad).

    10 log10(N) + 20 log10(|AF_rows * AF_cols| / N), floored at
    boresight - floor_rel_db.  Broadcasts over array-valued angles.
    """
    az_s, el_s = steering
    az_d, el_d = direction
    two_pi_d = 2.0 * np.pi * upa.element_spacing
    psi_col = two_pi_d * (np.cos(el_d) * np.sin(az_d) - np.cos(el_s) * np.sin(az_s))
    psi_row = two_pi_d * (np.sin(el_d) - np.sin(el_s))
    af = _af_ratio(upa.n_cols, psi_col) * _af_ratio(upa.n_rows, psi_row)
    af = np.maximum(af, 10.0 ** (-floor_rel_db / 20.0))
    gain = upa.boresight_gain_dbi + 20.0 * np.log10(af)
    return float(gain) if np.ndim(gain) == 0 else gain


def codebook_gains_dbi(codebook: BeamCodebook, direction) -> np.ndarray:
    """Gains of every beam toward one or many directions.

    direction = (az, el) scalars -> (n_beams,); arrays of shape (k,) ->
    (k, n_beams).
    """
    az_d, el_d = direction
    az_d = np.asarray(az_d, dtype=float)
    el_d = np.asarray(el_d, dtype=float)
    if az_d.ndim == 0:
        return array_gain_dbi(codebook.upa, (codebook.steering_az, codebook.steering_el),
                              (az_d, el_d))
    return array_gain_dbi(
        codebook.upa,
        (codebook.steering_az[None, :], codebook.steering_el[None, :]),
        (az_d[:, None], el_d[:, None]),
    )


def make_codebook(
    upa: Upa,
    owner: str,
    n_beams: int,
    az_span: tuple[float, float],
    el_steps: tuple[float, ...],
) -> BeamCodebook:
    """Uniform azimuth steps over az_span crossed with fixed elevation rows.

    Beams are ordered by (elevation, azimuth) so codebooks are deterministic.
    """
    if n_beams < 1:
        raise ValueError("need at least one beam")
    if n_beams % len(el_steps) != 0:
        raise ValueError(
            f"n_beams={n_beams} does not factor over {len(el_steps)} elevation rows"
        )
    n_az = n_beams // len(el_steps)
    lo, hi = az_span
    step = (hi - lo) / n_az
    beams = tuple(
        (lo + (k + 0.5) * step, el)
        for el in sorted(el_steps)
        for k in range(n_az)
    )
    return BeamCodebook(upa, beams, owner)


def default_trp_codebook(n_rows: int = 8, n_cols: int = 8, n_beams: int = 16,
                         sector_deg: float = 120.0,
                         el_steps_deg: tuple[float, ...] = (-10.0, 0.0)) -> BeamCodebook:
    half = math.radians(sector_deg) / 2
    return make_codebook(Upa(n_rows, n_cols), "trp", n_beams, (-half, half),
                         tuple(math.radians(e) for e in el_steps_deg))


def default_device_codebook(n_rows: int = 4, n_cols: int = 4,
                            n_beams: int = 8) -> BeamCodebook:
    return make_codebook(Upa(n_rows, n_cols), "device", n_beams,
                         (-math.pi, math.pi), (0.0,))


def best_beam_geometric(codebook: BeamCodebook, direction) -> int:
    """Index of the max-gain beam toward a local-frame direction; ties -> lowest index."""
    if len(codebook) == 0:
        raise ValueError("empty codebook")
    return int(np.argmax(codebook_gains_dbi(codebook, direction)))


def codebook_to_json(codebook: BeamCodebook) -> str:
    return json.dumps(
        {
            "owner": codebook.owner,
            "upa": {"n_rows": codebook.upa.n_rows, "n_cols": codebook.upa.n_cols,
                    "element_spacing": codebook.upa.element_spacing},
            "beams": [{"azimuth_rad": az, "elevation_rad": el}
                      for az, el in codebook.beams],
        },
        indent=2,
    )
