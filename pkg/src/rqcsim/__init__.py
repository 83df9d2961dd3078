"""Simulation of relational quantum computing from maximally mixed qubits.

Submodules:

* :mod:`rqcsim.qsim_core`: dense state-vector and density-matrix kernel.
* :mod:`rqcsim.growth`: growing the symmetric state by singlet/triplet tests.
* :mod:`rqcsim.localization`: Bayesian estimation of the relative angle.
* :mod:`rqcsim.pipeline`: experiments composing the above.
* :mod:`rqcsim.cli`: the ``rqcsim`` command.
"""

from .errors import CapacityError, DomainError, ImpossibleOutcomeError, NumericalError

__version__ = "0.1.0"

__all__ = ["CapacityError", "DomainError", "ImpossibleOutcomeError", "NumericalError", "__version__"]
