"""Smoke test for the bufrelay Python extension.

Build and install first:
    cd crates/py && maturin build --release -o dist && pip install dist/*.whl
"""

import json
import math
import tempfile
from pathlib import Path

import bufrelay


def close(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


def check_analytic():
    gg, gb, bg, bb = bufrelay.joint_state_probs(0.7, 0.6)
    assert close(gg, 0.42) and close(gb, 0.28) and close(bg, 0.18) and close(bb, 0.12)
    assert close(bufrelay.interruption_prob_conventional(0.7, 0.6), 0.58)

    stationary, delivery = bufrelay.solve_buffered_bernoulli_chain(0.7, 0.6)
    assert close(sum(stationary), 1.0, 1e-9)
    assert 1.0 - delivery < 0.58

    assert bufrelay.fifo_delivery_slot(5, [2, 3]) == 8
    assert bufrelay.fifo_delivery_slot(7, [2, 3, 9]) == 11
    assert bufrelay.deterministic_delivery_slot(7, [2, 3, 9]) == 10

    try:
        bufrelay.joint_state_probs(1.5, 0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-range probability accepted")


def check_channel_and_scheduler():
    assert close(bufrelay.pathloss_db(128.1, 37.6, 1000.0), 128.1, 1e-9)
    assert close(bufrelay.noise_power_dbm(-174.0, 180e3), -174.0 + 10 * math.log10(180e3), 1e-9)
    assert bufrelay.mw_schedule(10.0, 4.0, 2.0, 3.0) == "relay_to_user"
    assert bufrelay.mw_schedule(0.0, 0.0, 1.0, 1.0) == "idle"


def check_metrics_helpers():
    assert bufrelay.delay_cdf([1, 2, 2, 5]) == [(1.0, 0.25), (2.0, 0.75), (5.0, 1.0)]
    assert close(bufrelay.mean_delay([10, 14]), 12.0)


def check_simulation():
    base = bufrelay.Scenario("[scenario]\nhorizon_slots = 3000\nseed = 7\n")
    conv = base.with_mode("conventional").with_rate(30.0).run()
    buf = base.with_mode("buffered").with_rate(30.0).run()
    for m in (conv, buf):
        assert len(m.q_bs_bits) == 3000
        assert m.max_conservation_error_bits <= 1e-9
        assert m.delivered_packets + m.censored_packets == m.arrived_packets
        summary = json.loads(m.summary_json())
        assert summary["arrived_packets"] == m.arrived_packets
    # Same seed, same arrivals in both modes.
    assert conv.arrived_packets == buf.arrived_packets
    assert buf.mean_delay_ms() < conv.mean_delay_ms()

    with tempfile.TemporaryDirectory() as tmp:
        spec = bufrelay.Scenario(
            "[scenario]\nhorizon_slots = 2000\n[experiment]\nsweep = [20.0]\nparallel = 1\n"
        )
        summary = json.loads(spec.run_experiment(tmp))
        assert len(summary["groups"]) == 2
        assert (Path(tmp) / "summary.json").exists()


def main():
    check_analytic()
    check_channel_and_scheduler()
    check_metrics_helpers()
    check_simulation()
    print("bufrelay python smoke test: ok")


if __name__ == "__main__":
    main()
