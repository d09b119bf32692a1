import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from udld import linkbudget as lb

# Frozen from a 40-digit mpmath evaluation of the closed forms:
#   20*log10(4*pi*1*575e9/c)
FSPL_575GHZ_1M = 87.64114011567598
#   sqrt(52525)
ZERO_DBI_BEAMWIDTH = 229.18333272731680
#   L_A = 2*G(10 deg) - FSPL(3 m) - N(250 MHz) - 10log10(2^10 - 1) with P_t = 0 dBm
ABSORPTION_3M_DB = 17.145599587648594
K_ANCHOR_ORACLE = 1.3159734006988170

DEFAULT = lb.LinkBudgetParams()
B_REF = 250e6


def test_antenna_gain_examples():
    assert lb.antenna_gain(10.0) == pytest.approx(27.2, abs=0.05)
    assert lb.antenna_gain(ZERO_DBI_BEAMWIDTH) == pytest.approx(0.0, abs=1e-12)
    assert lb.antenna_gain(229.2) == pytest.approx(0.0, abs=1e-3)
    assert lb.antenna_gain(5.0) - lb.antenna_gain(10.0) == pytest.approx(20 * math.log10(2), abs=1e-12)


@pytest.mark.parametrize("bw", [0.0, -1.0, 360.0001, float("nan")])
def test_antenna_gain_domain(bw):
    with pytest.raises(lb.LinkBudgetError):
        lb.antenna_gain(bw)


@given(st.floats(0.01, 360.0))
def test_gain_round_trip(bw):
    assert lb.beamwidth_for_gain(lb.antenna_gain(bw)) == pytest.approx(bw, rel=1e-12)


@given(st.floats(0.01, 359.0), st.floats(0.001, 1.0))
def test_gain_strictly_decreasing(bw, delta):
    assert lb.antenna_gain(bw + delta) < lb.antenna_gain(bw)


def test_spreading_loss_examples():
    assert lb.spreading_loss(575e9, 1.0) == pytest.approx(FSPL_575GHZ_1M, abs=1e-9)
    assert lb.spreading_loss(575e9, 2.0) - lb.spreading_loss(575e9, 1.0) == pytest.approx(6.0206, abs=1e-4)
    assert lb.spreading_loss(1150e9, 1.0) - lb.spreading_loss(575e9, 1.0) == pytest.approx(6.0206, abs=1e-4)
    with pytest.raises(lb.LinkBudgetError):
        lb.spreading_loss(575e9, 0.0)
    with pytest.raises(lb.LinkBudgetError):
        lb.spreading_loss(-1.0, 1.0)


def test_absorption_loss_examples():
    vacuum = {500e9: 0.0, 600e9: 0.0}
    assert lb.absorption_loss(575e9, 7.0, 0.6, table=vacuum) == 0.0
    assert lb.absorption_loss(575e9, 3.0, 0.6, 296.0) == pytest.approx(ABSORPTION_3M_DB, abs=1e-9)
    a1 = lb.absorption_loss(575e9, 1.5, 0.6)
    assert lb.absorption_loss(575e9, 3.0, 0.6) == pytest.approx(2 * a1, rel=1e-14)


def test_absorption_interpolation_and_humidity():
    table = {500e9: 1.0, 600e9: 3.0}
    assert lb.absorption_coefficient(table, 550e9, 0.6) == pytest.approx(2.0)
    assert lb.absorption_coefficient(table, 550e9, 0.3) == pytest.approx(1.0)
    assert lb.absorption_coefficient(table, 550e9, 0.0) == 0.0


def test_absorption_out_of_band():
    with pytest.raises(lb.AbsorptionTableError):
        lb.absorption_loss(700e9, 1.0, 0.6)


def test_absorption_table_file(tmp_path):
    f = tmp_path / "k.txt"
    f.write_text("# frequency_hz k_per_m\n500e9 0.5\n600e9, 1.5\n\n")
    table = lb.load_absorption_table(f)
    assert table == {500e9: 0.5, 600e9: 1.5}
    p = lb.LinkBudgetParams(absorption_coefficient_table=table)
    assert lb.absorption_coefficient(p.absorption_coefficient_table, 550e9, 0.6) == pytest.approx(1.0)
    bad = tmp_path / "bad.txt"
    bad.write_text("500e9 1 2\n")
    with pytest.raises(lb.AbsorptionTableError):
        lb.load_absorption_table(bad)
    with pytest.raises(lb.AbsorptionTableError, match="missing"):
        lb.load_absorption_table(tmp_path / "missing.txt")


def test_params_validation():
    with pytest.raises(lb.LinkBudgetError):
        lb.LinkBudgetParams(beamwidth=0)
    with pytest.raises(lb.LinkBudgetError):
        lb.LinkBudgetParams(relative_humidity=1.5)
    with pytest.raises(lb.LinkBudgetError):
        lb.LinkBudgetParams(absorption_coefficient_table={500e9: -1.0})


def test_capacity_at_zero_db_snr_is_one_bit_per_hz():
    # Solve received power = noise floor for distance in a vacuum table
    p = DEFAULT.with_(absorption_coefficient_table={500e9: 0.0, 600e9: 0.0})
    budget = p.transmit_power + 2 * lb.antenna_gain(p.beamwidth) - lb.noise_power(p, B_REF)
    d = 10 ** (budget / 20) * lb.SPEED_OF_LIGHT / (4 * math.pi * p.carrier_frequency)
    assert lb.snr_db(p, B_REF, d) == pytest.approx(0.0, abs=1e-9)
    assert lb.capacity(p, B_REF, d) / B_REF == pytest.approx(1.0, abs=1e-9)


def test_capacity_default_operating_point():
    se = lb.capacity(DEFAULT, B_REF, 3.0) / B_REF
    assert se >= 10.0 - 1e-9
    assert lb.capacity(DEFAULT, B_REF, 1.0) > lb.capacity(DEFAULT, B_REF, 2.0) > lb.capacity(DEFAULT, B_REF, 3.0)


def _linear_capacity(p: lb.LinkBudgetParams, bandwidth: float, d: float) -> float:
    """Brute-force oracle entirely in watts and linear ratios."""
    pt_w = 1e-3 * 10 ** (p.transmit_power / 10)
    g = 52525.0 / p.beamwidth**2
    lam = lb.SPEED_OF_LIGHT / p.carrier_frequency
    spread = (4 * math.pi * d / lam) ** 2
    freqs = sorted(p.absorption_coefficient_table)
    ks = [p.absorption_coefficient_table[f] for f in freqs]
    k = np.interp(p.carrier_frequency, freqs, ks) * p.relative_humidity / p.reference_humidity
    absorb = math.exp(k * d)
    n0_w = 1e-3 * 10 ** (p.noise_density / 10)
    snr = pt_w * g * g / (absorb * spread * n0_w * bandwidth)
    return bandwidth * math.log2(1 + snr)


def test_db_arithmetic_matches_linear_oracle():
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        p = lb.LinkBudgetParams(
            carrier_frequency=rng.uniform(500e9, 600e9),
            transmit_power=rng.uniform(-20, 20),
            beamwidth=rng.uniform(0.5, 360),
            relative_humidity=rng.uniform(0, 1),
            noise_density=rng.uniform(-180, -160),
        )
        bw = rng.uniform(1e6, 10e9)
        d = rng.uniform(0.01, 20)
        # compare the SNR-sensitive part; log2(1+x) is evaluated on both sides
        assert lb.capacity(p, bw, d) == pytest.approx(_linear_capacity(p, bw, d), rel=1e-9)


@settings(max_examples=200)
@given(
    st.floats(-20, 20),
    st.floats(1, 90),
    st.floats(0.05, 10),
    st.floats(0.01, 5),
    st.floats(0.0, 1.0),
)
def test_capacity_monotone(pt, bw, d, dd, rh):
    p = DEFAULT.with_(transmit_power=pt, beamwidth=bw, relative_humidity=rh)
    assert lb.capacity(p, B_REF, d) > lb.capacity(p, B_REF, d + dd)
    assert lb.capacity(p.with_(transmit_power=pt + 1.0), B_REF, d) > lb.capacity(p, B_REF, d)


def test_capacity_many_matches_scalar():
    ds = np.linspace(0.1, 6, 40)
    vec = lb.capacity_many(DEFAULT, 1e9, ds)
    assert np.allclose(vec, [lb.capacity(DEFAULT, 1e9, d) for d in ds], rtol=1e-12)


def test_max_range_anchor():
    assert lb.max_range(DEFAULT, B_REF, 10.0) == pytest.approx(3.0, abs=1e-3)


def test_calibration_matches_closed_form():
    k = lb.calibrate_absorption(DEFAULT, B_REF, 10.0, 3.0)
    assert k == pytest.approx(K_ANCHOR_ORACLE, rel=1e-10)
    assert lb.K_ANCHOR_575GHZ == pytest.approx(K_ANCHOR_ORACLE, rel=1e-10)


def test_max_range_monotone_in_gain_and_absorption():
    base = lb.max_range(DEFAULT, B_REF, 10.0)
    assert lb.max_range(DEFAULT.with_(beamwidth=8.0), B_REF, 10.0) > base
    doubled = lb.default_absorption_table(2 * lb.K_ANCHOR_575GHZ)
    assert lb.max_range(DEFAULT.with_(absorption_coefficient_table=doubled), B_REF, 10.0) < base


def test_max_range_infeasible():
    weak = DEFAULT.with_(transmit_power=-300.0)
    assert lb.max_range(weak, B_REF, 10.0) is None


def test_min_beamwidth_operating_point():
    bw = lb.min_beamwidth(DEFAULT, 3.0, 10.0, B_REF)
    assert bw == pytest.approx(10.0, abs=0.05)


def test_min_beamwidth_short_range_allows_widest_beam():
    assert lb.min_beamwidth(DEFAULT, 1e-3, 10.0, B_REF) == lb.MAX_BEAMWIDTH_DEG


def test_min_beamwidth_narrows_with_distance():
    # Gain falls with beamwidth, so a longer link needs a narrower beam.
    b1, b2, b3 = (lb.min_beamwidth(DEFAULT, d, 10.0, B_REF) for d in (1.0, 2.0, 3.0))
    assert b1 > b2 > b3


def test_min_beamwidth_infeasible_is_none():
    assert lb.min_beamwidth(DEFAULT, 50.0, 10.0, B_REF) is None


@pytest.mark.parametrize("d", [1.0, 2.0, 3.0, 3.5])
def test_min_beamwidth_consistent_with_capacity(d):
    bw = lb.min_beamwidth(DEFAULT, d, 10.0, B_REF)
    target = 10.0 * B_REF
    assert lb.capacity(DEFAULT.with_(beamwidth=bw), B_REF, d) >= target
    assert lb.capacity(DEFAULT.with_(beamwidth=bw - 0.1), B_REF, d) > target
    assert lb.capacity(DEFAULT.with_(beamwidth=bw + 0.1), B_REF, d) < target
