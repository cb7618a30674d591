"""Model and config (de)serialization.

Models are stored as versioned JSON.  Floats are written with Python's repr
(shortest round-trip form), so a loaded model reproduces predictions bit for
bit.  The format major version must match on load.
"""

import hashlib
import json

import numpy as np

from .core import FitConfig, KnpModel, Standardization
from .errors import ValidationError
from .hermite import HermiteDistribution
from .kernel import GaussianKernel

MODEL_FORMAT = "knpchoice-model/1"


def config_hash(config):
    """Stable short hash of a config, for model/data compatibility checks."""
    payload = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def model_to_dict(model):
    return {
        "format": MODEL_FORMAT,
        "config": model.config.to_dict(),
        "config_hash": config_hash(model.config),
        "d_w": int(model.d_w),
        "standardization": {
            "mean": model.standardization.mean.tolist(),
            "scale": model.standardization.scale.tolist(),
        },
        "centers": model.centers.tolist(),
        "delta": model.delta.tolist(),
        "zeta": model.zeta.tolist(),
        "tau": model.tau.tolist(),
        "objective_value": model.objective_value,
        "n_components": int(model.n_components),
        "lambda_next": model.lambda_next,
        "rkhs_norm": model.rkhs_norm,
    }


def model_from_dict(d):
    fmt = d.get("format", "")
    if fmt != MODEL_FORMAT:
        raise ValidationError(
            f"unsupported model format {fmt!r}; this build reads {MODEL_FORMAT}"
        )
    try:
        return _model_from_dict_checked(d)
    except KeyError as exc:
        raise ValidationError(f"missing model field {exc}") from None


def _model_from_dict_checked(d):
    config = FitConfig.from_dict(d["config"])
    std = Standardization(
        mean=np.asarray(d["standardization"]["mean"], dtype=np.float64),
        scale=np.asarray(d["standardization"]["scale"], dtype=np.float64),
    )
    tau = np.asarray(d["tau"], dtype=np.float64)
    return KnpModel(
        config=config,
        standardization=std,
        kernel=GaussianKernel(config.bandwidth),
        centers=np.asarray(d["centers"], dtype=np.float64),
        delta=np.asarray(d["delta"], dtype=np.float64),
        zeta=np.asarray(d["zeta"], dtype=np.float64),
        tau=tau,
        dist=HermiteDistribution(tau),
        objective_value=float(d["objective_value"]),
        n_components=int(d["n_components"]),
        lambda_next=float(d["lambda_next"]),
        rkhs_norm=float(d["rkhs_norm"]),
        diagnostics=None,
    )


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path):
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    try:
        return model_from_dict(d)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
