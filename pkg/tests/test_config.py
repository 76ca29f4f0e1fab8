import pytest

from psvf.canonical import make_canonical
from psvf.config import RunConfig, load_config, parse_config_text


def test_parse_and_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\n[run]\nseed = 7\nrtol = 1e-9  # looser\nmax-branches = 64\nout = 'x.json'\n")
    cfg = load_config(path)
    assert (cfg.seed, cfg.rtol, cfg.max_branches, cfg.out) == (7, 1e-9, 64, "x.json")
    assert load_config(path, seed=3, out=None).seed == 3
    assert load_config(None) == RunConfig()


def test_bad_config_lines():
    with pytest.raises(ValueError):
        parse_config_text("nonsense")
    with pytest.raises(ValueError):
        parse_config_text("colour = 3")
    with pytest.raises(ValueError):
        RunConfig(rtol=0)


def test_apply_sets_tolerances():
    Z = RunConfig(on_sigma_tol=1e-7, rtol=1e-8).apply(make_canonical(2).field)
    assert Z.on_sigma_tol == 1e-7 and Z.meta["rtol"] == 1e-8
    assert "rtol" not in make_canonical(2).field.meta
