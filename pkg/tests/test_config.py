import pytest

from slitlab.config import ConfigError, ExperimentConfig, parse_config
from slitlab.cli import build_config


def test_defaults():
    cfg = parse_config("", "frequency")
    assert cfg.kind == "frequency" and cfg.h is None and cfg.alpha == 0.25
    assert cfg.coeff_field().n == 1


def test_full_config():
    text = """
kind: campanato
n: 2
h: 0.015625
alpha: 0.2
coefficients:
  type: perturbed
  eps0: 0.05
  seed: 3
tolerances:
  exponent: 0.1
output:
  dir: results
"""
    cfg = parse_config(text, "campanato")
    assert cfg.n == 2 and cfg.h == 1 / 64 and cfg.tol("exponent", 0.05) == 0.1
    assert cfg.coeff_field().eps0 == 0.05
    assert cfg.output["dir"] == "results"


@pytest.mark.parametrize("text, line, key", [
    ("h: 0.02\n", 1, "h"),
    ("n: 1\nalpha: 0.7\n", 2, "alpha"),
    ("n: 1\n\nbogus: 3\n", 3, "bogus"),
    ("coefficients:\n  type: identity\n  eps0: -1\n", 3, "coefficients.eps0"),
    ("tolerances: 3\n", 1, "tolerances"),
    ("n: 1\nn: 2\n", 2, "n"),
    ("seed: true\n", 1, "seed"),
])
def test_invalid_values_report_line(text, line, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line and exc.value.key == key
    assert f"line {line}" in str(exc.value)


def test_malformed_yaml_reports_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("n: 1\nh: [1, 2\nalpha: 0.2\n")
    assert exc.value.line is not None and "malformed" in str(exc.value)


def test_kind_mismatch_and_missing():
    with pytest.raises(ConfigError):
        parse_config("kind: harnack\n", "frequency")
    with pytest.raises(ConfigError):
        parse_config("n: 1\n")


def test_constant_matrix_shape():
    cfg = parse_config("coefficients:\n  type: constant\n  matrix: [[1, 0], [0, 1], [0, 0]]\n", "degenerate")
    with pytest.raises(ConfigError):
        cfg.coeff_field()


def test_config_file_overrides_flags():
    cfg = build_config("frequency", "h: 0.0078125\nseed: 4\n", h=1 / 32, seed=9, out="x")
    assert cfg.h == 1 / 128 and cfg.seed == 4 and cfg.output["dir"] == "x"
    cfg = build_config("frequency", None, h=1 / 32, seed=9)
    assert cfg.h == 1 / 32 and cfg.seed == 9
    with pytest.raises(ConfigError):
        build_config("frequency", None, h=0.1)


def test_dataclass_kind_required():
    with pytest.raises(TypeError):
        ExperimentConfig()
