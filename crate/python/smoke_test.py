"""Smoke test for the uavsched Python extension.

Build and run:
    cargo build --release -p uavsched-py --features extension-module
    cp target/release/libuavsched_py.so python/uavsched.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import uavsched  # noqa: E402

TINY = """
[clusters]
demands_mbit = [[0.12, 0.06], [0.18]]
[limits]
max_frames = 5
slots_per_frame = 2
[agent]
hidden = 16
episodes = 20
warmup = 64
"""


def main():
    s = uavsched.Scenario.from_toml(TINY)
    assert s.users == [2, 1]
    assert s.max_frames == 5
    assert math.isclose(s.hover_energy_per_frame, 0.02)

    exact = uavsched.solve(s, "exact", seed=1)
    brute = uavsched.solve(s, "bruteforce", seed=1)
    assert exact["status"] == brute["status"] == "ok", (exact, brute)
    assert math.isclose(exact["total_j"], brute["total_j"], rel_tol=1e-9)
    gss = uavsched.solve(s, "gss-heu", seed=1)
    assert gss["total_j"] >= brute["total_j"] - 1e-12

    agent, curve = uavsched.Agent.train(s, seed=0, episodes=10)
    assert len(curve) == 10
    result = agent.evaluate(s, seed=1)
    assert 0.0 <= result["delivered_ratio"] <= 1.0
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "agent.bin")
        agent.save(path)
        again = uavsched.Agent.load(path).evaluate(s, seed=1)
        assert again == result

    assert uavsched.map_action(0.0, 2.0, 4) == 2
    assert uavsched.map_action(-2.0, 2.0, 4) == 1
    assert math.isclose(uavsched.reward(20000, 0.01, "data-per-energy", 1.2), 5.024e6, rel_tol=1e-3)
    assert "acdsos" in uavsched.solvers()
    assert s.trace_table(0).startswith("cluster,group,pair,frame,level")

    try:
        uavsched.Scenario.from_toml("[radio]\nfoo = 1\n")
    except ValueError as e:
        assert "foo" in str(e)
    else:
        raise AssertionError("unknown key accepted")

    print("exact", exact["total_j"], "gss-heu", gss["total_j"], "agent", result["total_j"])
    print("smoke test passed")


if __name__ == "__main__":
    main()
