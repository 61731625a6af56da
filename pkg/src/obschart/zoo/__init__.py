"""Reference models: Gaussian mixture, one-unit tanh network, reduced-rank regression."""

from ..errors import ConfigError
from .gaussian import GaussianLocationModel
from .gmm import GmmModel, gmm_cumulants
from .rrr import RrrModel, rrr_cross_moments, rrr_determinant_relation, rrr_kl
from .tanh import TanhUnitModel, tanh_response

MODELS = {
    "gmm": GmmModel,
    "tanh": TanhUnitModel,
    "rrr": RrrModel,
    "gaussian": GaussianLocationModel,
}

HYPERPARAMETERS = {
    "gmm": ("sigma",),
    "tanh": ("sigma_n", "w0", "b0", "centers", "width"),
    "rrr": ("p", "q", "r", "sigma_x"),
    "gaussian": ("sigma",),
}


def build_model(name: str, **hyper):
    """Construct a zoo model by name; unknown names/hyperparameters raise ``ConfigError``."""
    if name not in MODELS:
        raise ConfigError(f"unknown model '{name}' (expected one of {sorted(MODELS)})", "model.name")
    unknown = set(hyper) - set(HYPERPARAMETERS[name])
    if unknown:
        raise ConfigError(f"unknown hyperparameter(s) {sorted(unknown)} for '{name}'", "model")
    return MODELS[name](**hyper)


__all__ = [
    "GaussianLocationModel",
    "GmmModel",
    "RrrModel",
    "TanhUnitModel",
    "build_model",
    "gmm_cumulants",
    "rrr_cross_moments",
    "rrr_determinant_relation",
    "rrr_kl",
    "tanh_response",
]
