"""Fractional p-Laplacians on finite metric measure spaces via hyperbolic fillings."""

__version__ = "0.1.0"

from .errors import FracLapError  # noqa: E402
from .metric_space import FiniteMetricMeasureSpace, greedy_net_hierarchy, load_space  # noqa: E402
from .filling import FillingGraph, FillingParams, make_filling  # noqa: E402
from .graph_calculus import SolveReport, solve_dirichlet, solve_neumann, weak_residual  # noqa: E402
from .besov import besov_energy, nonlocal_form, poincare_ratio, solve_nonlocal  # noqa: E402
from .fractional import (  # noqa: E402
    FractionalProblem,
    comparability_report,
    form_ET,
    make_problem,
    solve_fractional,
    spectral_reference_p2,
    stability_experiment,
)
from .sphericalization import ProductGrid, build_sphericalized  # noqa: E402

__all__ = [
    "FracLapError",
    "FiniteMetricMeasureSpace",
    "load_space",
    "greedy_net_hierarchy",
    "FillingParams",
    "FillingGraph",
    "make_filling",
    "SolveReport",
    "solve_dirichlet",
    "solve_neumann",
    "weak_residual",
    "besov_energy",
    "nonlocal_form",
    "solve_nonlocal",
    "poincare_ratio",
    "FractionalProblem",
    "make_problem",
    "form_ET",
    "solve_fractional",
    "comparability_report",
    "stability_experiment",
    "spectral_reference_p2",
    "ProductGrid",
    "build_sphericalized",
]
