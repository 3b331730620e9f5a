"""Self-describing JSON documents for fitted models.

Python's ``json`` writes floats with ``repr``, which round-trips every finite
double exactly, so a saved model reloads bit for bit.
"""

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError
from .estimators import KpcaModel
from .kernels import KernelSpec, feature_map_from_dict

FORMAT = "nyskpca-model"
FORMAT_VERSION = 1


def model_to_dict(model: KpcaModel) -> dict:
    return {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "variant": model.variant,
        "n": int(model.n),
        "m": int(model.m),
        "ell": int(model.ell),
        "seed": model.seed,
        "kernel": None if model.kernel is None else model.kernel.to_dict(),
        "eigenvalues": [float(v) for v in model.eigenvalues],
        "center": [float(v) for v in model.center],
        "coefficients": model.coefficients.tolist(),
        "indices": None if model.indices is None else [int(i) for i in model.indices],
        "points": None if model.points is None else model.points.tolist(),
        "feature_map": None if model.feature_map is None else model.feature_map.to_dict(),
    }


def model_from_dict(d: dict) -> KpcaModel:
    if d.get("format") != FORMAT:
        raise InputError("not a model document (missing format tag)")
    if d.get("version") != FORMAT_VERSION:
        raise InputError(f"unsupported model format version {d.get('version')!r}")
    try:
        ell = int(d["ell"])
        coeffs = np.asarray(d["coefficients"], dtype=float)
        if coeffs.size == 0:
            coeffs = coeffs.reshape(ell, 0)
        return KpcaModel(
            variant=d["variant"],
            eigenvalues=np.asarray(d["eigenvalues"], dtype=float),
            coefficients=coeffs,
            center=np.asarray(d["center"], dtype=float),
            n=int(d["n"]),
            m=int(d["m"]),
            kernel=None if d.get("kernel") is None else KernelSpec.from_dict(d["kernel"]),
            points=None if d.get("points") is None else np.asarray(d["points"], dtype=float),
            indices=None if d.get("indices") is None else np.asarray(d["indices"], dtype=int),
            feature_map=None if d.get("feature_map") is None else feature_map_from_dict(d["feature_map"]),
            seed=d.get("seed"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed model document: {exc}") from None


def save_model(model: KpcaModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, allow_nan=False)
        fh.write("\n")


def load_model(path) -> KpcaModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read model file: {exc}", path=str(path)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno, path=str(path)) from None
    return model_from_dict(doc)
