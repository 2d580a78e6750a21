"""Training small feed-forward networks by integrating port-Hamiltonian parameter dynamics."""

__version__ = "0.1.0"

from .net import Activation, NetworkSpec, forward, loss_and_grad, softplus  # noqa: E402
from .ode import IntegratorConfig, TrajectoryRecord, integrate  # noqa: E402
from .phdyn import PHConfig, PHState, PHSystem, grad_hamiltonian, hamiltonian, vector_field  # noqa: E402
from .train import GDConfig, SequentialConfig, train_batch, train_gd, train_sequential  # noqa: E402

__all__ = [
    "Activation", "NetworkSpec", "forward", "loss_and_grad", "softplus",
    "IntegratorConfig", "TrajectoryRecord", "integrate",
    "PHConfig", "PHState", "PHSystem", "grad_hamiltonian", "hamiltonian", "vector_field",
    "GDConfig", "SequentialConfig", "train_batch", "train_gd", "train_sequential",
]
