"""Smoke test of the Python bindings.

Build the extension first:
    cargo build -p chebsip-py --release --features extension-module
    cp target/release/libchebsip_py.so python/chebsip_py.so
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import chebsip_py as cs  # noqa: E402


def main() -> None:
    assert math.isclose(cs.Norm.l1()([3.0, -4.0]), 7.0)
    assert math.isclose(cs.Norm.l2()([3.0, -4.0]), 5.0)
    assert math.isclose(cs.Norm.weighted([[4.0, 0.0], [0.0, 1.0]])([1.0, 0.0]), 2.0)

    square = cs.Set([(0.0, 1.0), (0.0, 1.0)])
    assert square.contains([0.5, 0.5]) and not square.contains([1.5, 0.5])
    r = cs.chebyshev_center(square, cs.Norm.l2(), seed=2)
    assert abs(r.radius - math.sqrt(0.5)) < 1e-6, r
    assert all(abs(c - 0.5) < 1e-3 for c in r.center), r
    assert r.circumscribed

    line = cs.Set([(-5.0, 5.0), (-10.0, 10.0)])
    line.set_equalities([[2.0, -1.0]], [-3.0])
    r = cs.chebyshev_center(line, cs.Norm.l1(), seed=5, center_on_equalities=True)
    assert abs(r.center[0] + 0.75) < 1e-3 and abs(r.center[1] - 1.5) < 1e-3, r

    try:
        cs.Set([(1.0, 0.0)])
    except ValueError:
        pass
    else:
        raise AssertionError("an inverted box must be rejected")

    assert "disk" in cs.repro_ids()
    report = json.loads(cs.repro("disk"))
    assert all(c["passed"] for c in report["checks"]), report["checks"]

    problem = {
        "name": "square",
        "kind": "cheb",
        "space": {"dimension": 2, "norm": {"kind": "linf"}},
        "set": {"box": [[0, 2], [0, 1]]},
        "solver": {"seed": 7},
    }
    out = json.loads(cs.run_problem(json.dumps(problem)))
    assert abs(out["outcome"]["radius"] - 1.0) < 1e-6, out["outcome"]
    radius, center, bound = cs.oracle(json.dumps(problem), 128)
    assert abs(radius - 1.0) <= bound + 1e-9
    print("python smoke test passed")


if __name__ == "__main__":
    main()
