"""Python access to the elliptica experiments and a few numerical kernels."""

import json

from ._core import (
    EllipticaError,
    dirichlet_eigenvalues,
    frequency,
    mean_value_residual,
    phi_beta,
    stability_fit,
    version,
)

__all__ = [
    "EllipticaError",
    "catalog",
    "dirichlet_eigenvalues",
    "frequency",
    "mean_value_residual",
    "phi_beta",
    "run",
    "stability_fit",
    "version",
]

__version__ = version()


def catalog():
    """Experiment ids with their references, summaries and default parameters."""
    from ._core import catalog_json

    return json.loads(catalog_json())


def run(config, seed=None):
    """Run one experiment. config is a dict or a JSON string; returns (report, files, seconds)."""
    from ._core import run_json

    text = config if isinstance(config, str) else json.dumps(config)
    report, files, seconds = run_json(text, seed)
    return json.loads(report), dict(files), seconds
