"""pinnlab: training-efficiency lab for classical and hybrid quantum-classical
physics-informed neural networks on a parametrized 1-D PDE family."""

__version__ = "0.1.0"

from .autodiff import Jet2, ParamVector, Tape, check_grad, grad
from .networks import DenseSpec, HybridSpec, ModelHandle, build_model
from .pde import BoundaryFamily, Domain, LossBreakdown, PdeProblem
from .qsim import CircuitLayout, Statevector
from .training import TrainConfig, train

__all__ = [
    "Jet2", "ParamVector", "Tape", "check_grad", "grad",
    "DenseSpec", "HybridSpec", "ModelHandle", "build_model",
    "BoundaryFamily", "Domain", "LossBreakdown", "PdeProblem",
    "CircuitLayout", "Statevector",
    "TrainConfig", "train",
]
