import pytest

from confdimlab.config_params import _ConfigParams


def test_defaults(monkeypatch):
    for name in ("CONFDIMLAB_CELL_CAP", "CONFDIMLAB_MODULUS_TOL", "CONFDIMLAB_BETA_REF"):
        monkeypatch.delenv(name, raising=False)

    params = _ConfigParams()
    assert params.cell_cap == 10_000_000
    assert params.modulus_tol == 1e-9
    assert params.annulus_radius_fraction == 0.25
    assert params.beta_ref is None
    assert params.workers >= 1


@pytest.mark.parametrize(
    "variable, attribute, raw, expected",
    [
        ("CONFDIMLAB_CACHE_DIR", "cache_dir", "/tmp/graphs", "/tmp/graphs"),
        ("CONFDIMLAB_CELL_CAP", "cell_cap", "5000", 5000),
        ("CONFDIMLAB_MAX_ITER", "max_iter", "12", 12),
        ("CONFDIMLAB_PATHS_PER_ITERATION", "paths_per_iteration", "4", 4),
        ("CONFDIMLAB_MODULUS_TOL", "modulus_tol", "1e-6", 1e-6),
        ("CONFDIMLAB_LOEWNER_CAP", "loewner_cap", "8", 8.0),
        ("CONFDIMLAB_ANNULUS_RADIUS_FRACTION", "annulus_radius_fraction", "0.03125", 0.03125),
        ("CONFDIMLAB_ANNULUS_CENTERS", "annulus_centers", "3", 3),
        ("CONFDIMLAB_BETA_REF", "beta_ref", "2.5", 2.5),
        ("CONFDIMLAB_HARMONIC_TOL", "harmonic_tol", "1e-12", 1e-12),
        ("CONFDIMLAB_WORKERS", "workers", "0", 1),
    ],
)
def test_environment_overrides(monkeypatch, variable, attribute, raw, expected):
    monkeypatch.setenv(variable, raw)
    assert getattr(_ConfigParams(), attribute) == expected
