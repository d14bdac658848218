"""Representation functions of positive definite binary quadratic forms,
their local densities and singular series, linear correlations and zero
counts, sieve majorants and equidistribution tests on R/Z."""

from .arith import NotStabilized, ResourceLimitError
from .qform import QuadraticForm, r_D, r_f, reduced_forms, rep_count, rep_table
from .characters import divisor_char_sum, kronecker, proper_class_rep_count
from .lattice import AffineSystem, ConvexBody, kernel_system
from .local import beta_p, rho, rho_bruteforce, rho_formula_split
from .correlate import gowers_norm, lhs_enumerate, rhs_predict, zeros_count, zeros_predict

__version__ = "0.1.0"
