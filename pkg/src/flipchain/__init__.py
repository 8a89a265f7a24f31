"""Edge-flip Markov chains on labelled triangulations of the sphere."""

from .dynamics import (NODE_THEN_LINK, UNIFORM_LINK, ChainError, ChainState,
                       SelectionRule, check_normalization, cycle_balance_ratio,
                       flip_transition_probability, link_probability, run, step)
from .triangulation import (FlipOutcome, Link, Triangulation, TriangulationError,
                            canonical_code, degree_sequence, deserialize, flip,
                            is_flippable, make_christmas_tree, make_tetrahedron,
                            opposite_vertices, serialize, validate)

__version__ = "0.1.0"
