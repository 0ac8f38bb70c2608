import json

import numpy as np
import pytest

from memk import io
from memk.errors import FormatError
from memk.grid import Signal, TimeGrid
from memk.kernel import extract_kernel
from memk.spectral_model import EthEnsembleConfig, ReferenceFunction, build_observable, sample_spectrum


def test_signal_roundtrip(tmp_path):
    s = Signal.from_function(lambda t: np.exp(-t) / 3, TimeGrid(0.1, 50))
    io.write_signal(tmp_path / "a.csv", s)
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "# t,value"
    back = io.read_signal(tmp_path / "a.csv")
    assert back.values.tobytes() == s.values.tobytes()


def test_kernel_roundtrip(tmp_path):
    k = extract_kernel(Signal.from_function(lambda t: np.exp(-0.3 * t) * np.cos(t), TimeGrid(0.01, 300)))
    io.write_kernel(tmp_path / "k.csv", k)
    back = io.read_kernel(tmp_path / "k.csv")
    assert back.delta_weight == k.delta_weight
    assert back.smooth.values.tobytes() == k.smooth.values.tobytes()
    (tmp_path / "bad.csv").write_text("tau,value\n0,1\n0.1,2\n")
    with pytest.raises(FormatError):
        io.read_kernel(tmp_path / "bad.csv")


def test_table_roundtrip(tmp_path):
    cols = {"name": ["x", "y"], "n": [1, 2], "err": [0.1, 1 / 3]}
    io.write_table(tmp_path / "t.csv", cols, comments=["dt=0.05"])
    text = (tmp_path / "t.csv").read_text()
    assert text.startswith("# dt=0.05\nname,n,err\n")
    back = io.read_table(tmp_path / "t.csv")
    assert back["name"] == ["x", "y"]
    assert back["err"][1] == 1 / 3


def test_ensemble_container(tmp_path):
    config = EthEnsembleConfig(dimension=40, half_width=30.0, reference=ReferenceFunction("oscillation"), seed=9)
    spectrum = sample_spectrum(config)
    observable = build_observable(spectrum, config)
    sidecar = io.save_ensemble(tmp_path / "e.memk", config, spectrum, observable)
    assert (tmp_path / "e.memk").read_bytes().startswith(b"MEMK1\n")
    meta = json.loads(sidecar.read_text())
    assert meta["norms"]["spectral_radius"] == pytest.approx(1.0)
    cfg, spec, obs = io.load_ensemble(tmp_path / "e.memk")
    assert cfg == config
    np.testing.assert_array_equal(spec.energies, spectrum.energies)
    np.testing.assert_array_equal(obs.matrix, observable.matrix)
    np.testing.assert_array_equal(obs.eigenbasis, observable.eigenbasis)


def test_bad_container(tmp_path):
    (tmp_path / "x.memk").write_bytes(b"NOTME\n123")
    with pytest.raises(FormatError):
        io.load_ensemble(tmp_path / "x.memk")
    (tmp_path / "y.memk").write_bytes(b"MEMK1\n\x01")
    with pytest.raises(FormatError):
        io.load_ensemble(tmp_path / "y.memk")
