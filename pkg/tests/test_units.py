import math

import pytest
from hypothesis import given, strategies as st

from qsdvib import morse, units


def test_rate_au_to_angstrom_fs():
    # literature rounds this to 147.6
    assert units.RATE_AU_TO_ANG2FS == pytest.approx(147.6, abs=0.05)
    assert units.RATE_AU_TO_ANG2FS == pytest.approx(147.63272, rel=1e-6)


def test_rate_au_to_cm2_s():
    assert units.RATE_AU_TO_CM2S == pytest.approx(1.476327e33, rel=1e-5)


def test_convert_rate_aliases():
    v = units.convert_rate(1.0, "a.u.", "ang^-2 fs^-1")
    assert v == units.RATE_AU_TO_ANG2FS
    assert units.convert_rate(v, "Angstrom^-2 fs^-1", "au") == pytest.approx(1.0)
    assert units.convert_rate(1.0, "cm-2s-1", "cm^-2 s^-1") == 1.0


def test_convert_rate_unknown_unit():
    with pytest.raises(units.UnitError):
        units.convert_rate(1.0, "au", "eV")


def test_benchmark_rate_value():
    lam = units.convert_rate(9e-3, "ang^-2 fs^-1", "au")
    assert lam == pytest.approx(6.09621e-5, rel=1e-5)


@given(st.floats(min_value=1e-12, max_value=1e6),
       st.sampled_from(["au", "ang^-2 fs^-1", "cm^-2 s^-1"]),
       st.sampled_from(["au", "ang^-2 fs^-1", "cm^-2 s^-1"]))
def test_convert_rate_roundtrip(value, a, b):
    back = units.convert_rate(units.convert_rate(value, a, b), b, a)
    assert back == pytest.approx(value, rel=1e-12)


@given(st.floats(min_value=1e-6, max_value=1e6))
def test_length_time_roundtrips(v):
    assert units.bohr_to_angstrom(units.angstrom_to_bohr(v)) == pytest.approx(v, rel=1e-14)
    assert units.au_to_fs(units.fs_to_au(v)) == pytest.approx(v, rel=1e-14)
    assert units.hartree_to_wavenumber(units.wavenumber_to_hartree(v)) == pytest.approx(v, rel=1e-14)


def test_decoherence_rate_formula():
    # lam = 2*m*eta*kB*T
    assert units.decoherence_rate(1.0, 1.0, 1.0) == pytest.approx(
        2.0 * units.KB_HARTREE_PER_K)
    with pytest.raises(units.UnitError):
        units.decoherence_rate(-1.0, 300.0, 1.0)
    with pytest.raises(units.UnitError):
        units.decoherence_rate(math.nan, 300.0, 1.0)


def test_bath_from_friction_reference_point():
    spec = morse.MorseSpec.iodine()
    w0 = morse.harmonic_frequency(spec)
    bath = units.BathSpec.from_friction(0.05, 300.0, spec.m, w0)
    assert bath.lam == pytest.approx(1244.61, rel=1e-4)
    assert bath.xi == pytest.approx(15.0)
    assert bath.eta == pytest.approx(0.05 * spec.m * w0)


def test_bath_from_rate_units():
    b = units.BathSpec.from_rate(9e-3, "ang^-2 fs^-1")
    assert b.lam == pytest.approx(6.09621e-5, rel=1e-5)
    assert b.xi is None
    with pytest.raises(units.UnitError):
        units.BathSpec.from_rate(-1.0)


def test_markov_validity():
    spec = morse.MorseSpec.iodine()
    w0 = morse.harmonic_frequency(spec)
    ratio, valid = units.markov_validity(300.0, w0)
    assert ratio == pytest.approx(3.8908, rel=1e-4)
    assert not valid
    ratio_hot, valid_hot = units.markov_validity(1000.0, w0)
    assert ratio_hot == pytest.approx(ratio * 1000.0 / 300.0, rel=1e-12)
    assert valid_hot
    with pytest.raises(units.UnitError):
        units.markov_validity(300.0, 0.0)
    with pytest.raises(units.UnitError):
        units.markov_validity(-1.0, w0)


def test_xi_product():
    assert units.xi(0.05, 300.0) == pytest.approx(15.0)
    with pytest.raises(units.UnitError):
        units.xi(-0.1, 300.0)
