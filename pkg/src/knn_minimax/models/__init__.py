"""Synthetic models with analytic ground truth, plus the KDE."""

from __future__ import annotations

import json

from ..errors import ConfigError
from .assouad import AssouadNetwork, bump, bump_derivative, bump_derivative_sup, calibrated_network
from .kde import KdeModel, kde_eval, kde_fit, silverman_bandwidth
from .location import FAMILIES, ClassConditional, LocationModel, UniformDensity

__all__ = [
    "AssouadNetwork", "ClassConditional", "KdeModel", "LocationModel", "UniformDensity",
    "bump", "bump_derivative", "bump_derivative_sup", "calibrated_network",
    "kde_eval", "kde_fit", "silverman_bandwidth",
    "model_from_dict", "model_to_dict", "model_from_json", "model_to_json",
    "TABLE2_MODELS",
]

_ASSOUAD_KEYS = {"q", "m", "omega", "sigma", "c_phi", "variant", "gamma"}


def model_to_dict(model) -> dict:
    if isinstance(model, LocationModel):
        return {"family": model.family, "params": dict(model.params), "b": model.b}
    if isinstance(model, AssouadNetwork):
        return {"family": "assouad", "params": {
            "q": model.q, "m": model.m, "omega": model.omega, "sigma": list(model.sigma),
            "c_phi": model.c_phi, "variant": model.variant, "gamma": model.gamma}}
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(desc: dict):
    """Inverse of ``model_to_dict``.

    Parameters may sit under ``"params"`` or directly at top level, e.g.
    ``{"family": "powerlaw", "g": 1, "b": 0.5}``.  Unknown keys are errors.
    """
    if not isinstance(desc, dict) or "family" not in desc:
        raise ConfigError("model descriptor must be an object with a 'family' key")
    desc = dict(desc)
    family = str(desc.pop("family")).lower()
    params = desc.pop("params", {}) or {}
    if not isinstance(params, dict):
        raise ConfigError("'params' must be an object")
    if family == "assouad":
        params = {**params, **desc}
        extra = set(params) - _ASSOUAD_KEYS
        if extra:
            raise ConfigError(f"unknown keys for assouad: {sorted(extra)}")
        try:
            return AssouadNetwork(**{k: (tuple(v) if k == "sigma" else v) for k, v in params.items()})
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}")
    b = desc.pop("b", 1.0)
    params = {**params, **desc}
    try:
        return LocationModel(family, params, float(b))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def model_to_json(model) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True)


def model_from_json(text: str):
    try:
        desc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed model JSON: {exc}") from None
    return model_from_dict(desc)


# rows of the standard-vs-sliced comparison; the location a of the table is b here
TABLE2_MODELS = {
    "gauss_b1_s2": LocationModel("gauss", {"sigma": 2.0}, 1.0),
    "cauchy_b0.5_g0.5": LocationModel("cauchy", {"gamma": 0.5}, 0.5),
    "cauchy_b0.5_g1": LocationModel("cauchy", {"gamma": 1.0}, 0.5),
    "power_b0.5_g1": LocationModel("powerlaw", {"g": 1.0}, 0.5),
    "power_b0.5_g2": LocationModel("powerlaw", {"g": 2.0}, 0.5),
}
