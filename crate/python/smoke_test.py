"""Smoke test for the pyspikenet extension module.

Run with ``python -m pytest python/smoke_test.py`` after
``pip install --no-build-isolation ./crates/python``.
"""

import math

import pyspikenet as sn

TRAIN_CONFIG = """
model = "srm"
examples_budget = 600
eval_every = 300
learning_rate = 0.01

[topology]
kind = "layered"
visible = 2
hidden_layers = [16]
exogenous = 20

[dataset]
kind = "synthetic"
train_examples = 200
test_examples = 100
"""


def test_topology_shapes():
    t = sn.Topology.fully_connected(4, 5, 3)
    assert t.neuron_count == 9
    assert t.visible == [0, 1, 2, 3]
    assert t.hidden == [4, 5, 6, 7, 8]
    assert t.edge_count == 9 * 8 + 9 * 3
    readout = sn.Topology.fully_connected(2, 3, 1, readout_feedback=False)
    # visible neurons drive nothing
    for i in range(5):
        assert not {"n0", "n1"} & set(readout.parents(i))
    layered = sn.Topology.layered(2, [3], 4)
    assert layered.parents(0) == ["n2", "n3", "n4"]
    assert layered.parents(2) == ["x0", "x1", "x2", "x3"]


def test_probability_and_nll():
    assert sn.spike_probability(0.0, 3.0) == 0.5
    assert abs(sn.spike_probability(1.0, 1.0) - 1 / (1 + math.exp(-1))) < 1e-15
    assert abs(sn.nll_local(True, 0.0, 1.0) - math.log(2)) < 1e-15


def test_run_is_deterministic_and_spikes_arrive_two_steps_later():
    t = sn.Topology.layered(1, [], 1)
    net = sn.Network(t)
    net.weights = [5.0]
    spikes, potentials = net.run([[1, 0, 0, 0]])
    assert spikes == [[0, 0, 1, 1]]
    assert potentials[:3] == [[0.0], [0.0], [5.0]]
    assert net.run([[1, 0, 0, 0]]) == (spikes, potentials)


def test_bound_exceeds_marginal_nll():
    net = sn.Network(sn.Topology.fully_connected(1, 1, 1), seed=3)
    visible, inputs = [[1, 0, 1]], [[1, 1, 0]]
    assert net.expected_bound(visible, inputs) >= net.marginal_nll(visible, inputs) - 1e-12


def test_checkpoint_round_trip(tmp_path):
    ck = sn.Network(sn.Topology.layered(2, [3], 4), seed=1).to_checkpoint()
    path = tmp_path / "model.ckpt"
    ck.save(str(path))
    back = sn.Checkpoint.load(str(path))
    assert back == ck
    assert back.to_text() == ck.to_text()


def test_train_and_evaluate():
    records, ck = sn.train(TRAIN_CONFIG, ["seed=2"])
    assert [r["examples_seen"] for r in records] == [300, 600]
    assert 0.5 < records[-1]["test_accuracy"] <= 1.0
    assert ck.meta["model"] == "srm"
    assert sn.evaluate(ck, TRAIN_CONFIG) == records[-1]["test_accuracy"]


def test_errors_map_to_python_exceptions():
    import pytest

    with pytest.raises(ValueError):
        sn.train(TRAIN_CONFIG, ["examples_budget=0"])
    with pytest.raises(ValueError):
        sn.Checkpoint.from_text("format = nope\n")
    with pytest.raises(OSError):
        sn.Checkpoint.load("/nonexistent/model.ckpt")
