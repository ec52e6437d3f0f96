from typing import Optional

import pytest

from degenflow.config import settings
from degenflow.models import CoefficientSpec, DomainSpec, InitialCondition, SolverConfig
from degenflow.services.coefficients import build_coefficients, build_initial_values
from degenflow.services.solver import Field
from degenflow.utils.geometry import build_grid


def cube(dimension: int = 1) -> DomainSpec:
    return DomainSpec(kind="unit_cube", dimension=dimension)


def coefficient_spec(
    state=("constant", {"value": 1.0}),
    space=("one", {}),
    convection=("zero", {}),
    reaction: float = 0.0,
    source: float = 0.0,
    u_range=None,
    time=("one", {}),
) -> CoefficientSpec:
    return CoefficientSpec.model_validate({
        "diffusion": {
            "state": {"family": state[0], "params": state[1]},
            "space": {"family": space[0], "params": space[1]},
            "time": {"family": time[0], "params": time[1]},
        },
        "convection": {"family": convection[0], "params": convection[1]},
        "reaction": {"family": "constant", "params": {"value": reaction}},
        "source": {"family": "constant", "params": {"value": source}},
        "u_range": u_range,
    })


@pytest.fixture
def make_coeffs():
    """Coefficient set on a domain from (family, params) pairs"""
    def factory(domain: Optional[DomainSpec] = None, **kwargs):
        domain = domain or cube(1)
        return build_coefficients(coefficient_spec(**kwargs), domain)
    return factory


@pytest.fixture
def make_field():
    """Initial field of a named family on a fresh grid"""
    def factory(counts, family="sine_product", domain: Optional[DomainSpec] = None, **params):
        domain = domain or cube(len(counts))
        grid = build_grid(domain, counts)
        values = build_initial_values(InitialCondition(family=family, params=params), grid)
        return Field(grid, values)
    return factory


@pytest.fixture
def solver_config():
    def factory(**overrides):
        return SolverConfig(**overrides)
    return factory


@pytest.fixture
def isolated_dirs(tmp_path, monkeypatch):
    """Point the upload and results directories at a temporary location"""
    uploads = tmp_path / "uploads"
    results = tmp_path / "results"
    uploads.mkdir()
    results.mkdir()
    monkeypatch.setattr(settings, "UPLOAD_DIR", str(uploads))
    monkeypatch.setattr(settings, "RESULTS_DIR", str(results))
    return uploads, results
