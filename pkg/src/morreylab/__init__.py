"""Weighted Morrey spaces, their preduals and classical operators on grids."""
from .dyadic_grid import (Ball, CubeFamily, Domain, DyadicCube, GridError, GridFunction,
                          default_family, enumerate_cubes, integrate, restrict)
from .muckenhoupt import Weight, ap_constant, dual_weight, weight_measure
from .morrey_norms import MorreyParams, PredualParams, morrey_norm
from .report import VerificationReport

__version__ = "0.1.0"
