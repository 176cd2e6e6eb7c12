"""Quick check of the Python bindings.

Build and install first:
    pip install --no-build-isolation -e crates/py
"""

import json
import math
import tempfile
from pathlib import Path

import rigid_coverage as rc


def main():
    g = rc.Graph.generate(8, seed=3)
    assert g.n == 8 and len(g.edges) == 2 * 8 - 3
    assert g.is_laman()

    positions = [[math.cos(0.7 * i) * (1 + 0.1 * i), math.sin(0.7 * i)] for i in range(8)]
    assert rc.rigidity_rank(g, positions) == 2 * 8 - 3
    assert rc.is_rigid(g, positions)

    lost = max(range(8), key=g.degree)
    new_edges, _ = g.repair(lost)
    assert len(new_edges) == g.degree(lost) - 2
    h = g.without(lost)
    assert h.is_laman() and h.n == 7
    assert rc.Graph.from_json(g.to_json()).edges == g.edges

    h_one = rc.coverage_cost([[0.5, 0.5]])
    assert abs(h_one - 1.0 / 6.0) < 1e-12
    c = rc.centroids([[0.25, 0.5], [0.75, 0.5]])
    assert abs(c[0][0] - 0.25) < 1e-12 and abs(c[1][1] - 0.5) < 1e-12

    try:
        rc.validate_config('{"steps": 5, "faults": [{"at_step": 0, "robot": 1}]}')
    except ValueError:
        pass
    else:
        raise AssertionError("fault at step 0 accepted")

    trace = rc.simulate(json.dumps({"steps": 20}), threads=0)
    assert trace.steps == 20
    costs = [h for _, h in trace.costs_at_updates()]
    assert all(b <= a + 1e-9 for a, b in zip(costs, costs[1:]))
    with tempfile.TemporaryDirectory() as d:
        trace.export(d)
        rows = (Path(d) / "trajectories.csv").read_text().splitlines()
        assert len(rows) == 1 + 20 * 6

    print(f"ok: H went from {trace.coverage_costs[0]:.5f} to {trace.coverage_costs[-1]:.5f} in 20 steps")


if __name__ == "__main__":
    main()
