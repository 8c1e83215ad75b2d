"""Hybrid transmon / Kittel-mode / cavity models: dressed parameters, qubit spectra,
input-output responses, Kerr steady states and fitting."""
from .errors import InputError, LabelingError, NumericalError, RegimeWarning, TruncationWarning
from .params import ParameterFile, SystemParams, canonical, load_parameters

__version__ = "0.1.0"

__all__ = ["InputError", "LabelingError", "NumericalError", "RegimeWarning", "TruncationWarning",
           "ParameterFile", "SystemParams", "canonical", "load_parameters", "__version__"]
