"""Smoke test for the Python bindings.

Build and stage the extension first:

    cargo build -p netobserver-py --release
    cp target/release/libnetobserver_py.so python/netobserver_py.so

then run `python3 python/smoke_test.py`.
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import netobserver_py as no


def close(a, b, tol):
    assert abs(a - b) <= tol, f"expected {b} +/- {tol}, got {a}"


def main():
    plant = no.Plant.scalar(-0.5)
    assert plant.state_dim() == 1 and plant.is_detectable()

    graph = no.Digraph.all_to_all(2)
    assert graph.is_strongly_connected() and graph.is_weight_balanced()
    assert no.Digraph([[1.0, 1.0], [0.0, 1.0]]).incoming_neighbors(2) == [1, 2]

    # Two coupled observers with the published example gains.
    blocks = [[[[1.7896]], [[0.0538]]], [[[-1.1633]], [[2.2278]]]]
    es = no.assemble(plant, graph, blocks)

    eigs = es.eigenvalues()
    for re, im in eigs:
        close(re, -2.5087, 1e-3)
        close(abs(im), 0.1208, 1e-3)
    close(es.convergence_rate(), 2.5087, 1e-3)
    close(es.log_norm(), -1.9123, 1e-3)

    close(es.hinf(output="local-1", noise="common"), 0.7572, 1e-3)
    ss = es.steady_state([0.3, 0.3])
    close(ss[0], 0.2272, 1e-3)

    c, lam, g = es.kl_bound("dissipative", output="global", noise="common")
    close(lam, 1.9123, 1e-3)

    # Baseline norm from an explicit realization.
    close(no.hinf_norm([[-2.5]], [[2.0]], [[1.0]]), 0.8, 1e-6)

    # Synthesis round trip: the common-Lyapunov design meets the baseline.
    design = no.design_common_p(plant, graph, 2.5)
    assert design["gamma"] <= 0.8 * (1 + 1e-3)
    assert design["rate"] >= 2.5 - 1e-6

    # The certificate-backed star design strictly improves agent 2.
    cert = no.local_gain_certificate(plant, [[2.0]])
    assert cert["local_gamma"] < cert["gamma_l"] - 1e-3
    close(cert["gamma_l"], 0.8, 1e-6)

    # Short simulation reaches the constant-noise steady state.
    trace = es.simulate(
        [3.0], [[5.0], [5.0]], 20.0, 1e-3, noise_kind="constant", offset=0.3
    )
    close(trace["ebar"][-1][0], 0.2272, 1e-3)
    assert math.isclose(trace["t"][-1], 20.0, abs_tol=1e-9)

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
