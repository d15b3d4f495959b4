"""Unified point cloud distortion, polynomial rate/distortion models and
rate-constrained geometry/color QP selection."""

from .codec_proxy import ProxyCodecConfig, encode_decode, ingest_csv, preencode_sweep, write_csv
from .estimators import BudgetedQPSelector, RateDistortionModel
from .metrics import DistortionReport, MetricConfig, full_report, pc_psnr, unified_distortion
from .neighbors import NeighborIndex
from .optimizer import InfeasibleBudgetError, SolverConfig, SolverError, SolveResult, solve
from .ply import PlyError, load_ply, save_ply
from .pointcloud import PointCloud, rgb_to_yuv, yuv_to_rgb
from .rdmodel import FitError, Measurement, RdModels, fit, preencode_schedule
from .synthetic import synthetic_cloud

__version__ = "0.1.0"

__all__ = [
    "BudgetedQPSelector", "DistortionReport", "FitError", "InfeasibleBudgetError", "Measurement",
    "MetricConfig", "NeighborIndex", "PlyError", "PointCloud", "ProxyCodecConfig", "RateDistortionModel",
    "RdModels", "SolveResult", "SolverConfig", "SolverError", "encode_decode", "fit", "full_report",
    "ingest_csv", "load_ply", "pc_psnr", "preencode_schedule", "preencode_sweep", "rgb_to_yuv",
    "save_ply", "solve", "synthetic_cloud", "unified_distortion", "write_csv", "yuv_to_rgb",
]
