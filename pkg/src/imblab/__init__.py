"""Inverse magnetic billiards toolkit.

Straight chords inside a strictly convex domain, counterclockwise Larmor
arcs of radius mu outside it; the library provides the resulting return
map on Birkhoff coordinates, its exact Jacobians, the generating function,
periodic-orbit and rotation-number machinery, and caustic diagnostics.
"""

__version__ = "0.1.0"

from .boundary import (ConvexityViolation, Curve, CurvaturePair, Regime,
                       curve_from_spec)
from .dynamics import (MuIntersectionResult, PhaseState, SegmentRecord,
                       TangencyDiscontinuity, TangentChord, arc_map,
                       chord_map, jacobian_arc, jacobian_chord,
                       jacobian_return, jacobian_return_explicit,
                       mu_intersection_check, return_map,
                       standard_billiard_map)
from .action import (ActionBreakdown, NotRealizable, NotTwist,
                     QuadratureFailure, action_gradient, connect,
                     connect_all_branches, ellipse_closed_form_G,
                     f_mu_from_chi, f_mu_from_ell2, generating_function,
                     generating_function_pair, green_area, twist_measure)
from .orbits import (NoConvergence, OrbitTrace, PeriodicOrbit,
                     RegimeUnsupported, RotationNumber, SingularNewton,
                     find_periodic_shooting, find_periodic_variational,
                     iterate, rotation_number)
from .analysis import (CausticReport, DenominatorSingular, ImageLine,
                       NormalForm, PortraitSpec, RegimeMismatch,
                       caustic_report, chord_envelope, image_of_vertical_line,
                       larmor_center_locus, normal_form_coords,
                       phase_portrait, taylor_check_T, taylor_check_T2,
                       vanishing_curvature_guard)

__all__ = [name for name in dir() if not name.startswith("_")]
