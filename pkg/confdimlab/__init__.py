# The MIT License (MIT)
# Copyright (c) 2026 The confdimlab developers
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND,
# EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF
# MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT.
# IN NO EVENT SHALL THE AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM,
# DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR
# OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE
# OR OTHER DEALINGS IN THE SOFTWARE.

# Important: Update this when making new releases!
# Be sure to update `version` in 'setup.py' as well
__version__ = "1.0.1"
__author__ = "The confdimlab developers"

from .config_params import ConfigParams
from .energy_ops import (
    AxiomResult,
    EnergyForm,
    EnergyMeasure,
    ProductEnergyForm,
    axiom_suite,
    cutoff_capacity_ratio,
    energy,
    energy_form,
    energy_measure,
    ks_energy,
    minimal_energy_dominant,
    poincare_constant,
    product_energy,
    product_energy_density,
    product_energy_measure,
    product_form,
)
from .entities import (
    ApproximationGraph,
    CellAddress,
    CellMap,
    DiscreteFunction,
    FractalSpec,
    MeasureVector,
    VertexGraph,
    WeightFunction,
)
from .errors import (
    BadExponent,
    BallsOverlap,
    BracketFailure,
    CapExceeded,
    ConfdimlabError,
    EmptyBall,
    EmptyFamily,
    GraphMismatch,
    InsufficientLevels,
    InvalidSpec,
    NonConvergence,
    NonMonotoneSlope,
    RadiusOutOfRange,
    RatioMismatch,
    UnknownSpec,
    ZeroMass,
)
from .fractal_ops import (
    ahlfors_regularity,
    build_graph,
    build_vertex_graph,
    cell_pushforward,
    factor_indices,
    max_degree,
    metric_ball,
    power_spec,
    product_spec,
    registered_specs,
    resolve_spec,
    uniform_measure,
    uniform_scalability_defect,
)
from .graph_cache import load_or_build_graph
from .modulus_ops import (
    CurveFamily,
    ModulusResult,
    annulus_modulus,
    ball_to_ball_modulus,
    exhaustive_modulus,
    potential_from_weights,
    solve_modulus,
)
from .scaling_ops import (
    ConfDimEstimate,
    ScalingFit,
    estimate_confdim,
    fit_exponent,
    slope_monotonicity_report,
)
from .singularity_ops import (
    ConcentrationReport,
    HarmonicProblem,
    concentration_scan,
    effective_resistance,
    product_singularity_demo,
    solve_p_harmonic,
    triangle_star_resistance,
)
from .utils import QuietContext

__all__ = [
    # config_params.py
    "ConfigParams",
    # energy_ops.py
    "AxiomResult",
    "EnergyForm",
    "EnergyMeasure",
    "ProductEnergyForm",
    "axiom_suite",
    "cutoff_capacity_ratio",
    "energy",
    "energy_form",
    "energy_measure",
    "ks_energy",
    "minimal_energy_dominant",
    "poincare_constant",
    "product_energy",
    "product_energy_density",
    "product_energy_measure",
    "product_form",
    # entities.py
    "ApproximationGraph",
    "CellAddress",
    "CellMap",
    "DiscreteFunction",
    "FractalSpec",
    "MeasureVector",
    "VertexGraph",
    "WeightFunction",
    # errors.py
    "BadExponent",
    "BallsOverlap",
    "BracketFailure",
    "CapExceeded",
    "ConfdimlabError",
    "EmptyBall",
    "EmptyFamily",
    "GraphMismatch",
    "InsufficientLevels",
    "InvalidSpec",
    "NonConvergence",
    "NonMonotoneSlope",
    "RadiusOutOfRange",
    "RatioMismatch",
    "UnknownSpec",
    "ZeroMass",
    # fractal_ops.py
    "ahlfors_regularity",
    "build_graph",
    "build_vertex_graph",
    "cell_pushforward",
    "factor_indices",
    "max_degree",
    "metric_ball",
    "power_spec",
    "product_spec",
    "registered_specs",
    "resolve_spec",
    "uniform_measure",
    "uniform_scalability_defect",
    # graph_cache.py
    "load_or_build_graph",
    # modulus_ops.py
    "CurveFamily",
    "ModulusResult",
    "annulus_modulus",
    "ball_to_ball_modulus",
    "exhaustive_modulus",
    "potential_from_weights",
    "solve_modulus",
    # scaling_ops.py
    "ConfDimEstimate",
    "ScalingFit",
    "estimate_confdim",
    "fit_exponent",
    "slope_monotonicity_report",
    # singularity_ops.py
    "ConcentrationReport",
    "HarmonicProblem",
    "concentration_scan",
    "effective_resistance",
    "product_singularity_demo",
    "solve_p_harmonic",
    "triangle_star_resistance",
    # utils.py
    "QuietContext",
]
