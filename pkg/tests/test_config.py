import pytest
from hypothesis import given, strategies as st

from fbms.config import RunConfig, TIERS, finer, parse_config_text, tier


def test_defaults_round_trip():
    assert parse_config_text("") == RunConfig()


def test_parse_comments_quotes_and_tolerances():
    cfg = parse_config_text('''
        # run settings
        tier = "fast"   # quick
        seed = 7
        h0 = 0.2
        index_relative = 1e-5
    ''')
    assert cfg.tier == "fast" and cfg.seed == 7 and cfg.h0 == 0.2
    assert cfg.tolerances.index_relative == 1e-5


@pytest.mark.parametrize("text", ["tier fast", "nonsense = 1", "seed = x", "tier = medium"])
def test_parse_errors(text):
    with pytest.raises(ValueError):
        parse_config_text(text)


@given(st.integers(0, 2**31), st.floats(0.01, 0.3, allow_nan=False))
def test_parse_roundtrip_numbers(seed, h0):
    cfg = parse_config_text(f"seed = {seed}\nh0 = {h0!r}")
    assert cfg.seed == seed and cfg.h0 == h0


def test_tiers_are_ordered():
    assert finer(tier("fast")) == TIERS["standard"]
    assert finer(tier("standard")) == TIERS["fine"]
    doubled = finer(tier("fine"))
    assert doubled.radial == 2 * TIERS["fine"].radial
    with pytest.raises(ValueError):
        tier("huge")
