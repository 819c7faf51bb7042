"""Smoke test for the pyccsim extension.

Build and install first:
    pip install --no-build-isolation ./crates/python
"""

import json
import sys
import tempfile

import pyccsim


def main() -> int:
    names = [p["name"] for p in pyccsim.presets()]
    assert "cubic-vs-bbr3-pfifo-up" in names, names

    cfg = pyccsim.preset("cubic-vs-bbr3-pfifo-up", seed=2)
    cfg["duration"] = 20.0
    samples = pyccsim.simulate(cfg)
    assert len(samples) == 200 * len(cfg["flows"]), len(samples)
    assert all(s["goodput"] >= 0 for s in samples)

    with tempfile.TemporaryDirectory() as out:
        run = pyccsim.run_scenario(json.dumps(cfg), out)
        again = pyccsim.summarize(run["log_path"])
        assert again == run["summary"]

    try:
        pyccsim.validate({"name": "bad", "duration": -1, "flows": []})
    except ValueError as e:
        print("rejected invalid scenario:", e)
    else:
        raise AssertionError("invalid scenario accepted")

    assert abs(pyccsim.jain_index([1.0, 3.0]) - 0.8) < 1e-12
    print("jain", round(run["summary"]["jain_index"], 4))
    for f in run["summary"]["flows"]:
        print(f"flow {f['flow_id']} {f['cca']:<5} share {f['share']:.3f}")
    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
