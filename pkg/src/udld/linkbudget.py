"""THz link budget: antenna gain, spreading/absorption loss, rate and range.

All quantities are in dB/dBm except where a function name says otherwise.
Functions are pure and operate on an immutable :class:`LinkBudgetParams`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
# 10*log10(e): converts nepers of field-power attenuation (K*d) to dB.
DB_PER_NEPER = 10.0 * math.log10(math.e)
GAIN_APERTURE_CONST = 52525.0

MIN_BEAMWIDTH_DEG = 0.5
MAX_BEAMWIDTH_DEG = 360.0

REFERENCE_HUMIDITY = 0.6
REFERENCE_TEMPERATURE = 296.0

# Absorption coefficient at 575 GHz, 60% RH, 296 K (1/m). Produced by
# calibrate_absorption() so that the default operating point reaches 3.0 m.
K_ANCHOR_575GHZ = 1.3159734006985673

# Relative shape of the absorption coefficient over 500-600 GHz, normalised to
# 1.0 at 575 GHz. Illustrative: follows the rise towards the 557 GHz water line.
_ABSORPTION_SHAPE = {
    500e9: 0.35,
    510e9: 0.40,
    520e9: 0.50,
    530e9: 0.65,
    540e9: 0.90,
    550e9: 1.60,
    557e9: 2.40,
    560e9: 2.00,
    570e9: 1.15,
    575e9: 1.00,
    580e9: 0.90,
    590e9: 0.80,
    600e9: 0.75,
}


class LinkBudgetError(ValueError):
    """Raised for parameters outside a function's domain."""


class AbsorptionTableError(LinkBudgetError):
    """Raised when a frequency falls outside the absorption table's band."""


def default_absorption_table(k_anchor: float = K_ANCHOR_575GHZ) -> dict[float, float]:
    return {f: k_anchor * s for f, s in _ABSORPTION_SHAPE.items()}


def load_absorption_table(path: str | Path) -> dict[float, float]:
    """Read a two-column ``frequency_hz k_per_m`` text file.

    Blank lines and ``#`` comments are skipped; commas are accepted as separators.
    """
    path = Path(path)
    table: dict[float, float] = {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise AbsorptionTableError(f"cannot read absorption table {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise AbsorptionTableError(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
        table[float(parts[0])] = float(parts[1])
    if not table:
        raise AbsorptionTableError(f"{path}: empty absorption table")
    return table


@dataclass(frozen=True)
class LinkBudgetParams:
    carrier_frequency: float = 575e9  # Hz
    transmit_power: float = 0.0  # dBm
    beamwidth: float = 10.0  # degrees
    relative_humidity: float = REFERENCE_HUMIDITY
    temperature: float = REFERENCE_TEMPERATURE  # K
    noise_density: float = -174.0  # dBm/Hz
    absorption_coefficient_table: Mapping[float, float] = field(
        default_factory=default_absorption_table
    )
    reference_humidity: float = REFERENCE_HUMIDITY

    def __post_init__(self) -> None:
        if not self.carrier_frequency > 0:
            raise LinkBudgetError("carrier_frequency must be > 0")
        if not 0 < self.beamwidth <= MAX_BEAMWIDTH_DEG:
            raise LinkBudgetError(f"beamwidth must be in (0, 360], got {self.beamwidth}")
        if not 0 <= self.relative_humidity <= 1:
            raise LinkBudgetError("relative_humidity must be within [0, 1]")
        if not self.temperature > 0:
            raise LinkBudgetError("temperature must be > 0")
        if not 0 < self.reference_humidity <= 1:
            raise LinkBudgetError("reference_humidity must be within (0, 1]")
        table = dict(sorted((float(f), float(k)) for f, k in self.absorption_coefficient_table.items()))
        if not table:
            raise LinkBudgetError("absorption_coefficient_table is empty")
        if any(k < 0 or not math.isfinite(k) for k in table.values()):
            raise LinkBudgetError("absorption coefficients must be finite and >= 0")
        object.__setattr__(self, "absorption_coefficient_table", table)

    def with_(self, **changes) -> "LinkBudgetParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class LinkQuality:
    distance: float
    bandwidth: float
    rate: float
    received_power: float


def antenna_gain(beamwidth: float) -> float:
    """Gain in dBi of a symmetric pencil beam of the given width in degrees."""
    if not 0 < beamwidth <= MAX_BEAMWIDTH_DEG:
        raise LinkBudgetError(f"beamwidth must be in (0, 360], got {beamwidth}")
    return 10.0 * math.log10(GAIN_APERTURE_CONST / (beamwidth * beamwidth))


def beamwidth_for_gain(gain_dbi: float) -> float:
    """Inverse of :func:`antenna_gain`."""
    bw = math.sqrt(GAIN_APERTURE_CONST / 10.0 ** (gain_dbi / 10.0))
    if bw > MAX_BEAMWIDTH_DEG:
        raise LinkBudgetError(f"gain {gain_dbi} dBi is below the widest-beam gain")
    return bw


def spreading_loss(frequency: float, distance: float) -> float:
    """Free-space path loss in dB."""
    if not (frequency > 0 and distance > 0):
        raise LinkBudgetError("frequency and distance must be > 0")
    return 20.0 * math.log10(4.0 * math.pi * distance * frequency / SPEED_OF_LIGHT)


def absorption_coefficient(
    table: Mapping[float, float],
    frequency: float,
    humidity: float,
    temperature: float = REFERENCE_TEMPERATURE,
    reference_humidity: float = REFERENCE_HUMIDITY,
) -> float:
    """K(f, rho, T) in 1/m: linear interpolation in ``table``, linear in humidity.

    Temperature is accepted for interface completeness; the model is flat in T.
    """
    freqs = np.fromiter(table.keys(), dtype=float)
    order = np.argsort(freqs)
    freqs = freqs[order]
    ks = np.fromiter(table.values(), dtype=float)[order]
    if not freqs[0] <= frequency <= freqs[-1]:
        raise AbsorptionTableError(
            f"frequency {frequency / 1e9:.3f} GHz outside absorption table band "
            f"[{freqs[0] / 1e9:.3f}, {freqs[-1] / 1e9:.3f}] GHz"
        )
    k_ref = float(np.interp(frequency, freqs, ks))
    return k_ref * humidity / reference_humidity


def absorption_loss(
    frequency: float,
    distance: float,
    humidity: float,
    temperature: float = REFERENCE_TEMPERATURE,
    table: Optional[Mapping[float, float]] = None,
    reference_humidity: float = REFERENCE_HUMIDITY,
) -> float:
    """Molecular absorption loss in dB over ``distance`` metres."""
    if distance <= 0:
        raise LinkBudgetError("distance must be > 0")
    if table is None:
        table = default_absorption_table()
    k = absorption_coefficient(table, frequency, humidity, temperature, reference_humidity)
    return DB_PER_NEPER * k * distance


def _params_absorption_loss(params: LinkBudgetParams, distance: float) -> float:
    return absorption_loss(
        params.carrier_frequency,
        distance,
        params.relative_humidity,
        params.temperature,
        params.absorption_coefficient_table,
        params.reference_humidity,
    )


def received_power(params: LinkBudgetParams, distance: float) -> float:
    """Received power in dBm with both ends using ``params.beamwidth``."""
    g = antenna_gain(params.beamwidth)
    return (
        params.transmit_power
        + 2.0 * g
        - _params_absorption_loss(params, distance)
        - spreading_loss(params.carrier_frequency, distance)
    )


def noise_power(params: LinkBudgetParams, bandwidth: float) -> float:
    if bandwidth <= 0:
        raise LinkBudgetError("bandwidth must be > 0")
    return params.noise_density + 10.0 * math.log10(bandwidth)


def snr_db(params: LinkBudgetParams, bandwidth: float, distance: float) -> float:
    return received_power(params, distance) - noise_power(params, bandwidth)


def capacity(params: LinkBudgetParams, bandwidth: float, distance: float) -> float:
    """Shannon rate in bit/s for a ``distance``-metre link on ``bandwidth`` Hz."""
    snr = 10.0 ** (snr_db(params, bandwidth, distance) / 10.0)
    return bandwidth * math.log2(1.0 + snr)


def link_quality(params: LinkBudgetParams, bandwidth: float, distance: float) -> LinkQuality:
    return LinkQuality(
        distance=distance,
        bandwidth=bandwidth,
        rate=capacity(params, bandwidth, distance),
        received_power=received_power(params, distance),
    )


def required_snr_db(target_spectral_efficiency: float) -> float:
    return 10.0 * math.log10(2.0**target_spectral_efficiency - 1.0)


def min_beamwidth(
    params: LinkBudgetParams,
    distance: float,
    target_spectral_efficiency: float,
    bandwidth: float,
    tol: float = 0.01,
) -> Optional[float]:
    """Beamwidth in degrees at which the link just meets the target efficiency.

    Gain falls with beamwidth, so every beam narrower than the returned value
    also meets the target; a wider one does not. Returns ``MAX_BEAMWIDTH_DEG``
    when even an isotropic-ish beam suffices, and ``None`` when the target is
    unreachable with the narrowest beam (``MIN_BEAMWIDTH_DEG``). ``params.beamwidth``
    is ignored.
    """
    if distance <= 0:
        raise LinkBudgetError("distance must be > 0")
    target = target_spectral_efficiency * bandwidth

    def ok(bw: float) -> bool:
        return capacity(params.with_(beamwidth=bw), bandwidth, distance) >= target

    if ok(MAX_BEAMWIDTH_DEG):
        return MAX_BEAMWIDTH_DEG
    if not ok(MIN_BEAMWIDTH_DEG):
        return None
    lo, hi = MIN_BEAMWIDTH_DEG, MAX_BEAMWIDTH_DEG  # ok(lo) and not ok(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def max_range(
    params: LinkBudgetParams,
    bandwidth: float,
    target_spectral_efficiency: float,
    tol: float = 1e-3,
    d_min: float = 1e-3,
) -> Optional[float]:
    """Largest distance in metres at which capacity meets the target, or ``None``."""
    target = target_spectral_efficiency * bandwidth

    def ok(d: float) -> bool:
        return capacity(params, bandwidth, d) >= target

    if not ok(d_min):
        return None
    lo, hi = d_min, 1.0
    while ok(hi):
        lo, hi = hi, hi * 2.0
        if hi > 1e7:
            raise LinkBudgetError("range diverges; check parameters")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def calibrate_absorption(
    params: LinkBudgetParams,
    bandwidth: float,
    target_spectral_efficiency: float,
    target_range: float,
    anchor_frequency: float = 575e9,
    tol: float = 1e-12,
) -> float:
    """Solve for the table anchor K(anchor_frequency) giving ``target_range``.

    The default table shape is rescaled so its value at ``anchor_frequency``
    equals the returned coefficient (1/m at the reference humidity). The solve
    bisects on K directly: the capacity at ``target_range`` must equal the target.
    """
    shape = default_absorption_table(1.0)
    scale = np.interp(anchor_frequency, sorted(shape), [shape[f] for f in sorted(shape)])
    target = target_spectral_efficiency * bandwidth

    def cap_at(k: float) -> float:
        table = {f: k * s / scale for f, s in shape.items()}
        p = params.with_(absorption_coefficient_table=table, carrier_frequency=anchor_frequency)
        return capacity(p, bandwidth, target_range)

    lo, hi = 0.0, 1.0
    if cap_at(lo) < target:
        raise LinkBudgetError("target range unreachable even in vacuum")
    while cap_at(hi) >= target:
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cap_at(mid) >= target:
            lo = mid
        else:
            hi = mid
    return lo


def capacity_many(params: LinkBudgetParams, bandwidth: float, distances) -> np.ndarray:
    """Vectorised :func:`capacity` over an array of distances (metres)."""
    d = np.asarray(distances, dtype=float)
    if np.any(d <= 0):
        raise LinkBudgetError("distances must be > 0")
    k = absorption_coefficient(
        params.absorption_coefficient_table,
        params.carrier_frequency,
        params.relative_humidity,
        params.temperature,
        params.reference_humidity,
    )
    fspl = 20.0 * np.log10(4.0 * np.pi * d * params.carrier_frequency / SPEED_OF_LIGHT)
    snr = (
        params.transmit_power
        + 2.0 * antenna_gain(params.beamwidth)
        - DB_PER_NEPER * k * d
        - fspl
        - noise_power(params, bandwidth)
    )
    return bandwidth * np.log2(1.0 + 10.0 ** (snr / 10.0))
