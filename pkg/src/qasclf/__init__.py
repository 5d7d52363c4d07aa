"""Noise-aware quantum architecture search for a 4-qubit Iris classifier."""
from .circuits import Genotype, SearchSpace, build_haa, build_hea, realize
from .classifier import Model, TrainConfig, train
from .estimators import QASClassifier, QuantumClassifier
from .landscape import TrajectoryPCA, fit_pca, scan
from .readout import ReadoutCorrector
from .sim import DensityMatrix, DephasingChannel, Gate, Observable

__version__ = "0.1.0"
