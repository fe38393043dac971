"""Bulk and edge topological indices of Dirac and rotating shallow-water
interface models."""
from .bulk import berry_curvature, boundary_degree, bulk_index, chern_half
from .edge import (EdgeChannel, FermiLine, IndexReport, bec_report, edge_index, edge_report,
                   halfplane_edge_index, intersection_number, trace_channels)
from .fiber import FiberSpectrum, ScanConfig, scan_fibers, scan_halfline, solve_fiber, solve_halfline
from .model import (Grid, HalfLineBC, bloch_point, build_fiber_operator, build_halfline_operator,
                    build_planar_hamiltonian, parity_operator, particle_hole_operator)
from .profiles import ModelSpec, Profile, Sector
from .quadrature import QuadratureConfig

__all__ = [
    "berry_curvature", "boundary_degree", "bulk_index", "chern_half",
    "EdgeChannel", "FermiLine", "IndexReport", "bec_report", "edge_index", "edge_report",
    "halfplane_edge_index", "intersection_number", "trace_channels",
    "FiberSpectrum", "ScanConfig", "scan_fibers", "scan_halfline", "solve_fiber", "solve_halfline",
    "Grid", "HalfLineBC", "bloch_point", "build_fiber_operator", "build_halfline_operator",
    "build_planar_hamiltonian", "parity_operator", "particle_hole_operator",
    "ModelSpec", "Profile", "Sector", "QuadratureConfig",
]
