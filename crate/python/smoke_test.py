"""Smoke test for the pan_py extension. Build with `maturin build -m crates/python/Cargo.toml` and install the wheel."""

import json
import math
import os
import tempfile

import pan_py


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


p3 = pan_py.Graph([(0, 1), (1, 2)], 3)
assert (p3.num_nodes, p3.num_edges) == (3, 2)
assert p3.edges() == [(0, 1), (1, 2)]

m, z, diag = pan_py.met_matrix(p3, [1.0, 1.0, 1.0], "rw")
assert z == [4.0, 5.0, 4.0]
assert all(close(a, b) for a, b in zip(diag, [0.5, 0.6, 0.5]))
assert all(close(sum(row), 1.0) for row in m)

k3 = pan_py.Graph([(0, 1), (1, 2), (0, 2)], 3)
assert pan_py.path_count(k3, 0, 0, 3) == 2
sc = pan_py.centrality(k3, "sc-exact")
assert all(close(v, (math.e**2 + 2 / math.e) / 3, 1e-9) for v in sc)

try:
    pan_py.met_matrix(p3, [1.0, 0.0], "sym")
except ValueError:
    pass
else:
    raise AssertionError("non-positive weights accepted")

ds = pan_py.generate_pointpatterns(2, node_range=(100, 100), sweeps=10, seed=3)
assert len(ds) == 6 and ds.num_classes == 3
assert ds.labels() == [0, 0, 1, 1, 2, 2]
assert len(ds.positions(0)) == 100

with tempfile.TemporaryDirectory() as d:
    path = os.path.join(d, "pp.pands")
    ds.save(path)
    again = pan_py.Dataset.load(path)
    assert [g.edges() for g in again] == [g.edges() for g in ds]

    cfg = os.path.join(d, "run.toml")
    with open(cfg, "w") as f:
        f.write('[dataset]\npath = "pp.pands"\nsplit = [0.5, 0.25, 0.25]\n'
                '[model]\nconv_dims = [8]\nL = 2\n[optim]\nepochs = 2\nbatch_size = 2\n')
    report = json.loads(pan_py.train(cfg, ["optim.lr=0.01"]))
    assert report["metric"] == "accuracy" and len(report["epochs"]) == 2

print("pan_py smoke test ok")
