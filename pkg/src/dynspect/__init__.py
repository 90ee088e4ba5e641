"""dynspect: dynamic SPECT simulation and simultaneous
reconstruction-segmentation of region labels and tracer curves."""

from .kinetics import ArterialInput, ConcentrationMatrix, Phantom, basis_curve, make_phantom, render_frames
from .metrics import EvalReport, evaluate, image_error, segmentation_accuracy, sweep
from .recon import ReconState, SolverConfig, reconstruct, reconstruct_baseline_em
from .sim import AcquisitionSchedule, Sinogram, monte_carlo, poissonize, schedule_preset, simulate_clean
from .tomo import AttenuationMap, CameraPose, ImageGeometry, ProjectorFrame, adjoint, build_projector, forward
from .varmodel import BilinearOperator, LabelField, ObjectiveParams, kl, objective, tv_aniso

__version__ = "0.1.0"
