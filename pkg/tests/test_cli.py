import math
from pathlib import Path

import pytest

from conecocycle import __version__
from conecocycle.cli import main, read_csv, read_summary
from conecocycle.config import load_config, parse_config
from conecocycle.errors import ValidationError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

MIDDLE_THIRD = """
[basis]
kind = "chebyshev"
n = 16

[systems.cantor]
family = "cookie_cutter"
branches = [
  { expansion = 3.0, position = 0.0, anchor = "left" },
  { expansion = 3.0, position = 1.0, anchor = "right" },
]

[env]
alphabet = ["cantor"]
law = "periodic"
word = ["cantor"]
{seed}

[run]
orbit_len = 20
depth = 10
{extra}
"""


def write(tmp_path, seed="seed = 0", extra=""):
    p = tmp_path / "cfg.toml"
    p.write_text(MIDDLE_THIRD.replace("{seed}", seed).replace("{extra}", extra))
    return p


def test_exponent_zero(tmp_path):
    assert main(["exponent", "--config", str(CONFIGS / "c01_zero_exponent.toml"), "--out", str(tmp_path)]) == 0
    s = read_summary(tmp_path / "summary.json")
    assert abs(s["chi"]) <= 1e-8 and s["subcommand"] == "exponent"
    cols, data = read_csv(tmp_path / "exponent.csv")
    assert cols == ["k", "log_p_k"] and data.shape == (200, 2)


def test_dimension_middle_third(tmp_path):
    assert main(["dimension", "--config", str(write(tmp_path)), "--out", str(tmp_path)]) == 0
    s = read_summary(tmp_path / "summary.json")
    assert abs(s["root"] - math.log(2) / math.log(3)) <= 1e-8


def test_outputs_carry_header(tmp_path):
    cfg = write(tmp_path)
    main(["dimension", "--config", str(cfg), "--out", str(tmp_path)])
    sha = load_config(cfg).sha256
    for name in ("dimension.csv", "summary.json"):
        first = (tmp_path / name).read_text().splitlines()[0]
        assert first == f"# conecocycle {__version__} config-sha256={sha}"


def test_missing_seed(tmp_path, capsys):
    assert main(["dimension", "--config", str(write(tmp_path, seed="")), "--out", str(tmp_path)]) == 2
    assert "seed" in capsys.readouterr().err


@pytest.mark.parametrize("extra", ["bogus = 1", 'weight = "nope"'])
def test_invalid_run_keys(tmp_path, extra):
    assert main(["dimension", "--config", str(write(tmp_path, extra=extra)), "--out", str(tmp_path)]) == 2


def test_missing_file(tmp_path):
    assert main(["density", "--config", str(tmp_path / "none.toml")]) == 2


def test_numerical_failure(tmp_path):
    cfg = write(tmp_path, extra="bracket = [0.7, 1.0]")
    assert main(["dimension", "--config", str(cfg), "--out", str(tmp_path)]) == 3


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", "x.toml"])
    assert exc.value.code == 64


def test_bad_workers(tmp_path):
    assert main(["dimension", "--config", str(write(tmp_path)), "--out", str(tmp_path), "--workers", "0"]) == 2


def test_workers_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CONECOCYCLE_WORKERS", "3")
    from conecocycle.cli import build_parser

    args = build_parser().parse_args(["density", "--config", "x.toml"])
    assert args.workers == 3


def test_cone_check(tmp_path):
    assert main(["cone-check", "--config", str(CONFIGS / "c09_cone_cookie.toml"), "--out", str(tmp_path)]) == 0
    s = read_summary(tmp_path / "summary.json")
    assert s["invariance_ok"] and s["certificates"]["cookie"]["within_bound"]


def test_density_csv(tmp_path):
    assert main(["density", "--config", str(CONFIGS / "c02_gauss_density.toml"), "--out", str(tmp_path)]) == 0
    cols, data = read_csv(tmp_path / "density.csv")
    assert cols == ["k", "x", "f"]
    assert max(abs(f - 1 / ((1 + x) * math.log(2))) for _, x, f in data) <= 1e-6


def test_parse_config_rejects_small_grid():
    data = {"basis": {"kind": "fourier", "n": 4}, "systems": {}, "env": {"alphabet": ["a"], "seed": 0}}
    with pytest.raises(ValidationError):
        parse_config(data)


def test_parse_config_unknown_family():
    data = {
        "basis": {"kind": "fourier", "n": 16},
        "systems": {"a": {"family": "logistic"}},
        "env": {"alphabet": ["a"], "seed": 0},
    }
    with pytest.raises(ValidationError, match="unknown family"):
        parse_config(data)


def test_parse_config_missing_system():
    data = {"basis": {"kind": "fourier", "n": 16}, "systems": {}, "env": {"alphabet": ["a"], "seed": 0}}
    with pytest.raises(ValidationError, match="no \\[systems"):
        parse_config(data)


@pytest.mark.parametrize("name", sorted(p.stem for p in CONFIGS.glob("*.toml")))
def test_shipped_configs_parse(name):
    cfg = load_config(CONFIGS / f"{name}.toml")
    assert len(cfg.sha256) == 64 and cfg.n >= 8
