"""Non-intrusive tracking of eigenvalue curves of parametric nonlinear eigenproblems."""
from .adaptive import AdaptiveConfig, MismatchPolicy, RunReport, model_error_at, run_adaptive
from .beyn import (BeynConfig, EigenSnapshot, QuadratureBreakdownError, RankSaturationWarning,
                   solve_nonparametric)
from .bifurcation import BifurcationGroup, ImplicitSurrogate, build_surrogate, detect_groups, roots_at
from .core import Contour, ParametricProblem, contains, contour_nodes
from .curves import (CurveModel, InterpolationConfig, SegmentKind, Track, build_interpolant,
                     build_model, evaluate, harmonic_mean_segment, stitch)
from .matching import (InfeasibleMatchError, MatchPlan, build_cost, flag_bifurcation_pairs, match,
                       solve_assignment)
from .problems import (SplitFormProblem, constant_spectrum, cubic_companion, delayed_heat,
                       load_split_form, toy_bifurcation)

__version__ = "0.1.0"
