import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ecl import config, grid
from ecl.config import ConfigError, from_text

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = """
scenario = unit
geometry.topology = truncated_box
geometry.extent = 8
geometry.points = 257
geometry.n = 1
T = 1
marginal.mu.family = gaussian
marginal.mu.mean = -1
marginal.mu.var = 0.5
marginal.nu.family = bump
marginal.nu.center = 1
marginal.nu.width = 1.5
"""


def with_lines(*lines, drop=()):
    kept = [ln for ln in BASE.splitlines() if not any(ln.startswith(d) for d in drop)]
    return "\n".join(kept + list(lines)) + "\n"


def materialize(cfg):
    g = config.build_scenario_grid(cfg)
    return g, config.marginal_density(cfg.mu, g, "mu", cfg.base_dir)


def test_defaults():
    cfg = from_text(BASE)
    assert cfg.scenario == "unit"
    assert (cfg.tol, cfg.max_iter, cfg.samples) == (1e-10, 10000, 63)
    assert cfg.csv == "unit.csv" and cfg.report == "unit.verdict"
    assert cfg.tol_margin is None
    assert not cfg.heat_reduction


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.cfg")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = config.load(path)
    assert cfg.scenario == path.stem


def test_comments_and_blank_lines():
    cfg = from_text("# header\n\n" + BASE.replace("T = 1", "T = 2   # horizon"))
    assert cfg.T == 2.0


@pytest.mark.parametrize("text,message", [
    (with_lines("T = 2"), "duplicate"),
    (with_lines("colour = red"), "unknown"),
    (with_lines(drop=("T =",)), "missing"),
    (with_lines("geometry.topology = torus", drop=("geometry.topology",)), "topology"),
    (with_lines("marginal.mu.var = -1", drop=("marginal.mu.var",)), "positive"),
    (with_lines("marginal.mu.family = cauchy", drop=("marginal.mu.family",)), "family"),
    (with_lines("geometry.potential = neg_cos"), "periodic"),
    (with_lines("T = abc", drop=("T =",)), "number"),
    (with_lines("T = inf", drop=("T =",)), "finite"),
    (with_lines("curve.samples = 6"), "samples"),
    (with_lines("solver.tol = 0"), "solver"),
    (BASE + "just words\n", "key = value"),
])
def test_rejections(text, message):
    with pytest.raises(ConfigError, match=message):
        from_text(text)


def test_support_too_close_to_face():
    cfg = from_text(with_lines("marginal.mu.mean = 7", drop=("marginal.mu.mean",)))
    g = config.build_scenario_grid(cfg)
    with pytest.raises(ConfigError, match="face"):
        config.marginal_density(cfg.mu, g, "mu", cfg.base_dir)


def test_gaussian_profile_normalized():
    g, rho = materialize(from_text(BASE))
    x = g.axes[0]
    expected = np.exp(-(x + 1) ** 2) / math.sqrt(math.pi)
    assert np.max(np.abs(rho.values - expected)) < 1e-9


def test_bump_family_on_circle_is_chordal():
    cfg = from_text("""
geometry.topology = periodic_circle
geometry.points = 64
T = 1
marginal.mu.family = bump
marginal.mu.center = 0.1
marginal.mu.width = 1
marginal.nu.family = uniform
marginal.nu.a = 0
marginal.nu.b = 7
""")
    g, rho = materialize(cfg)
    x = g.axes[0]
    prof = np.exp(-(2 * np.sin((x - 0.1) / 2)) ** 4)
    assert np.allclose(rho.values, prof / grid.integrate(g.field(prof)), rtol=1e-12)


def test_density_relative_to_weighted_measure():
    cfg = from_text("""
geometry.topology = periodic_circle
geometry.points = 64
geometry.potential = neg_cos
geometry.n = 2
T = 1
marginal.mu.family = gaussian
marginal.mu.mean = 3
marginal.mu.var = 1
marginal.nu.family = heat_of
marginal.nu.source = mu
""")
    assert cfg.heat_reduction
    g, rho = materialize(cfg)
    # the profile is relative to Lebesgue measure, so rho * e^-V is the profile shape
    shape = rho.values * np.exp(-g.potential)
    x = g.axes[0]
    target = np.exp(-(2 * np.sin((x - 3) / 2)) ** 2 / 2)
    assert np.allclose(shape / shape.max(), target / target.max(), rtol=1e-12)


def test_fourier_potential_and_normalized_measure():
    cfg = from_text("""
geometry.topology = periodic_circle
geometry.points = 64
geometry.potential = fourier
geometry.potential.cos = 0.5, 0.1
geometry.potential.sin = 0.2
geometry.normalize_measure = true
geometry.n = 3
T = 1
marginal.mu.family = bump
marginal.mu.center = 1
marginal.mu.width = 1
marginal.nu.family = bump
marginal.nu.center = 4
marginal.nu.width = 1
""")
    g = config.build_scenario_grid(cfg)
    assert g.total_mass == pytest.approx(1.0, abs=1e-13)
    x = g.axes[0]
    V = g.potential
    assert np.ptp(V - (0.5 * np.cos(x) + 0.1 * np.cos(2 * x) + 0.2 * np.sin(x))) < 1e-13


def test_mixture_weights():
    text = with_lines(
        "marginal.mu.family = mixture", "marginal.mu.components = 2",
        "marginal.mu.0.family = gaussian", "marginal.mu.0.mean = -3", "marginal.mu.0.var = 0.25",
        "marginal.mu.0.weight = 1",
        "marginal.mu.1.family = gaussian", "marginal.mu.1.mean = 3", "marginal.mu.1.var = 0.25",
        "marginal.mu.1.weight = 3",
        drop=("marginal.mu.",))
    g, rho = materialize(from_text(text))
    x = g.axes[0]
    left = grid.integrate(g.field(np.where(x < 0, rho.values, 0.0)))
    assert left == pytest.approx(0.25, abs=1e-9)


def test_file_marginal(tmp_path):
    g = grid.box(8.0, 257)
    x = g.axes[0]
    np.savetxt(tmp_path / "mu.txt", np.exp(-x**2))
    text = with_lines("marginal.mu.family = file", "marginal.mu.path = mu.txt", drop=("marginal.mu.",))
    (tmp_path / "s.cfg").write_text(text)
    cfg = config.load(tmp_path / "s.cfg")
    _, rho = materialize(cfg)
    assert np.allclose(rho.values, np.exp(-x**2) / math.sqrt(math.pi), atol=1e-9)
    np.savetxt(tmp_path / "mu.txt", np.exp(-x[:-1] ** 2))
    with pytest.raises(ConfigError, match="values"):
        materialize(config.load(tmp_path / "s.cfg"))


def test_missing_file():
    with pytest.raises(ConfigError):
        config.load("/nonexistent/file.cfg")


@given(st.floats(min_value=0.05, max_value=50.0), st.floats(min_value=-3.0, max_value=3.0))
def test_numeric_roundtrip(var, mean):
    cfg = from_text(with_lines(f"marginal.mu.var = {var!r}", f"marginal.mu.mean = {mean!r}",
                               drop=("marginal.mu.var", "marginal.mu.mean")))
    assert cfg.mu.params["var"] == var
    assert cfg.mu.params["mean"] == (mean,)
