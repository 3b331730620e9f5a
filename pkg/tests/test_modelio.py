import json

import numpy as np
import pytest

from nyskpca.errors import ConfigError, InputError
from nyskpca.estimators import embed, fit
from nyskpca.kernels import KernelSpec, SampleSet
from nyskpca.modelio import load_model, model_from_dict, model_to_dict, save_model


@pytest.mark.parametrize(
    "kernel,variant,m",
    [
        (KernelSpec.spectral_power(2.0, 50), "ekpca", None),
        (KernelSpec.spectral_power(2.0, 50), "nystrom", 20),
        (KernelSpec.spectral_power(2.0, 50), "rff", 30),
        (KernelSpec.gaussian(0.4), "rff", 30),
        (KernelSpec.polynomial(3, 1.0), "nystrom", 15),
    ],
)
def test_round_trip_bit_exact(tmp_path, kernel, variant, m):
    X = SampleSet.uniform(40, 1).points
    model = fit(kernel, X, variant, 3, m=m, seed=4)
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    assert back.variant == model.variant and back.n == model.n and back.m == model.m
    np.testing.assert_array_equal(back.eigenvalues, model.eigenvalues)
    np.testing.assert_array_equal(back.coefficients, model.coefficients)
    np.testing.assert_array_equal(back.center, model.center)
    Y = SampleSet.uniform(25, 2).points
    np.testing.assert_array_equal(embed(back, Y), embed(model, Y))


def test_bad_documents(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n "format": "nyskpca-model",\n "version": 1,\n oops\n}')
    with pytest.raises(ConfigError) as info:
        load_model(p)
    assert info.value.line == 4
    with pytest.raises(InputError):
        model_from_dict({"format": "other"})
    with pytest.raises(InputError):
        model_from_dict({"format": "nyskpca-model", "version": 99})
    d = model_to_dict(fit(KernelSpec.linear(), SampleSet.uniform(5, 0).points, "ekpca", 1))
    del d["eigenvalues"]
    with pytest.raises(InputError):
        model_from_dict(d)
    with pytest.raises(ConfigError):
        load_model(tmp_path / "missing.json")


def test_document_is_plain_json():
    d = model_to_dict(fit(KernelSpec.gaussian(1.0), SampleSet.uniform(6, 0).points, "ekpca", 2))
    assert json.loads(json.dumps(d)) == d
