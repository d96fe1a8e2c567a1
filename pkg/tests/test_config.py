import pytest
from hypothesis import given, strategies as st

from sensorsel.harness import config as cfg


def test_empty_file_gives_reference_defaults(tmp_path):
    path = tmp_path / "empty.conf"
    path.write_text("# nothing set\n\n")
    c = cfg.load_config(path)
    assert c == cfg.ExperimentConfig()
    assert (c.field.grid, c.field.side) == (6, 50.0)
    assert (c.signal.p0, c.signal.sigma) == (1000.0, 0.2)
    assert (c.motion.interval, c.motion.q) == (1.25, 2.5e-3)
    assert c.prior.mean == (-23.0, -24.0, 2.0, 2.0) and c.prior.sigma_x == 6.0
    assert c.filter.particles == 5000
    assert (c.nsga.pop_size, c.nsga.generations) == (100, 100)


@pytest.mark.parametrize("text,key", [
    ("quant.kind = quantized\nquant.bits = 0", "quant.bits"),
    ("run.trials = -1", "run.trials"),
    ("selection.scheme = random", "selection.scheme"),
    ("prior.mean = 1, 2, 3", "prior.mean"),
    ("signal.sigma = abc", "signal.sigma"),
    ("nsga.pop_size = 7", "nsga.pop_size"),
    ("field.probabilities = 0.5, 0.5", "field.probabilities"),
])
def test_validation_errors_name_the_key(text, key):
    with pytest.raises(cfg.ConfigError, match=f"^{key}"):
        cfg.loads(text)


def test_unknown_and_repeated_keys():
    with pytest.raises(cfg.ConfigError, match="signal.power: unknown key"):
        cfg.loads("signal.power = 3")
    with pytest.raises(cfg.ConfigError, match="set twice"):
        cfg.loads("run.seed = 1\nrun.seed = 2")
    with pytest.raises(cfg.ConfigError):
        cfg.loads("just some words")


def test_missing_file(tmp_path):
    with pytest.raises(cfg.ConfigError, match="cannot read"):
        cfg.load_config(tmp_path / "nope.conf")


def test_parsing_details():
    c = cfg.loads("""
        selection.scheme = "fixed_a"   # quoted strings are fine
        selection.count = 3
        nsga.seed_extremes = no
        run.seed = 0x10
        prior.mean = [-20, -20, 1, 1]
    """)
    assert c.selection.scheme == "fixed_a" and c.selection.count == 3
    assert c.nsga.seed_extremes is False and c.run.seed == 16
    assert c.prior.mean == (-20.0, -20.0, 1.0, 1.0)


def test_replace_helper():
    c = cfg.ExperimentConfig().replace(run__trials=7, **{"filter.particles": 10})
    assert c.run.trials == 7 and c.filter.particles == 10


def test_dumps_round_trip_and_workers_excluded():
    c = cfg.loads("field.probabilities = " + ", ".join(["0.3"] * 36) + "\nrun.workers = 4")
    assert cfg.loads(cfg.dumps(c)) == c
    assert "run.workers" not in cfg.dumps(c, include_workers=False)
    assert "run.workers" not in cfg.as_dict(c, include_workers=False)


@given(st.floats(1e-3, 1e3), st.integers(1, 10_000), st.integers(0, 2**64 - 1), st.sampled_from(cfg.SCHEMES))
def test_round_trip_property(sigma, particles, seed, scheme):
    c = cfg.ExperimentConfig().replace(**{"signal.sigma": sigma, "filter.particles": particles,
                                          "run.seed": seed, "selection.scheme": scheme})
    assert cfg.loads(cfg.dumps(c)) == c


def test_schema_lists_every_key():
    assert "selection.w1" in cfg.SCHEMA and "run.workers" in cfg.SCHEMA
    assert len(cfg.SCHEMA) == len(cfg.as_dict(cfg.ExperimentConfig()))
