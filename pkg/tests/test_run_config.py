import pytest

from classes.errors import ConfigError
from run_config import RunSettings, load_config_file, parse_convergence, resolve


def write(tmp_path, text: str) -> str:
    path = tmp_path / "run.ini"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_defaults():
    settings = resolve()
    assert settings == RunSettings()
    assert settings.methods == ("eigenvalue",)
    assert settings.verification_config("eigenvalue").eig_n == settings.modes


def test_file_without_header(tmp_path):
    values = load_config_file(write(tmp_path, "ic = sin(x)\nmodes = 16  # small\ndt = 1e-3\nmethod = both\n"
                                              "convergence = 8, 16,32\n"))
    assert values == {"ic": "sin(x)", "modes": 16, "dt": 1e-3, "method": "both", "convergence": (8, 16, 32)}


def test_file_with_header_and_comments(tmp_path):
    values = load_config_file(write(tmp_path, "# run file\n[run]\nthreshold = 0.25\n; note\nhorizon = 2\n"))
    assert values == {"threshold": 0.25, "horizon": 2.0}


def test_precedence(tmp_path):
    file_values = load_config_file(write(tmp_path, "modes = 16\nt_end = 0.5\nmethod = worst\n"))
    settings = resolve(file_values, {"modes": 32, "t_end": None, "method": None})
    assert settings.modes == 32
    assert settings.t_end == 0.5
    assert settings.method == "worst"
    assert settings.methods == ("worst_case",)
    assert settings.dt == RunSettings().dt


@pytest.mark.parametrize("text", [
    "modes = many\n",
    "method = interval\n",
    "colour = blue\n",
    "convergence = 8,x\n",
    "[other]\nmodes = 8\n",
    "modes\n",
])
def test_bad_files(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config_file(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(str(tmp_path / "absent.ini"))


def test_unknown_flag():
    with pytest.raises(ConfigError):
        resolve({}, {"colour": "blue"})


def test_parse_convergence():
    assert parse_convergence("8,16,32") == (8, 16, 32)
    assert parse_convergence("8,") == (8,)
    for text in ("", "a", "0,8", "8.5"):
        with pytest.raises(ConfigError):
            parse_convergence(text)


def test_verification_config_carries_settings():
    settings = resolve({}, {"modes": 16, "dt": 1e-3, "t_end": 0.01, "eig_n": 8, "threshold": 0.3,
                            "horizon": 0.5, "workers": 2, "residual_safety": 1.5})
    cfg = settings.verification_config("worst_case")
    assert cfg.method == "worst_case"
    assert cfg.solver.n_modes == 16 and cfg.solver.n_steps == 10
    assert (cfg.eig_n, cfg.smallness_threshold, cfg.time_horizon) == (8, 0.3, 0.5)
    assert (cfg.workers, cfg.residual_safety) == (2, 1.5)
