#!/usr/bin/env python3
"""Join-kernel shootout: compiled extension against the pure fallback.

Each timing runs in a fresh subprocess because the backend is chosen
once per process, at import, from AGENTMESH_PURE. The work per
scenario is identical on both sides, so the ratio is kernel speedup.

    python3 benchmarks/kernel_benchmark.py
    python3 benchmarks/kernel_benchmark.py --scenario closure:80 --repeat 5
"""

import argparse
import json
import os
import subprocess
import sys
import time

def run_closure(n: int):
    from agentmesh.bench.workload import build_workload
    from agentmesh.rulekit import Engine
    w = build_workload(n)
    eng = Engine()
    eng.load_source(w.source)
    t0 = time.perf_counter()
    fired = eng.run()
    dt = time.perf_counter() - t0
    want = n * (n - 1) * (n - 2) // 6      # one firing per composable pair
    if fired != want or eng.fact_count() != w.expected_facts:
        raise SystemExit(f"closure fired {fired}/{want}, "
                         f"facts {eng.fact_count()}/{w.expected_facts}")
    return dt, fired, "firings"


def run_scan(pkts: int):
    from agentmesh.nids import synth
    from agentmesh.nids.expert import signature_source
    from agentmesh.nids.factfile import packet_fact
    from agentmesh.nids.pcap import decode_pcap
    from agentmesh.rulekit import Engine

    frames = []
    while len(frames) < pkts - 120:
        frames += synth.benign_frames() + synth.probe_frames()
    frames = frames[:pkts - 120] + synth.flood_frames(count=120)
    records = decode_pcap(synth.build_pcap(frames))

    eng = Engine()
    eng.load_source(signature_source("all"))
    eng.reset()
    t0 = time.perf_counter()
    for i, rec in enumerate(records):
        eng.assert_spec(packet_fact(i + 1, rec))
    eng.run()
    dt = time.perf_counter() - t0
    if str(eng.result) != "ALERT":
        raise SystemExit("scan scenario lost its flood alert")
    return dt, len(records), "packets"


def run_child(spec: str):
    from agentmesh.rulekit import BACKEND
    kind, _, arg = spec.partition(":")
    fn = {"closure": run_closure, "scan": run_scan}[kind]
    dt, work, unit = fn(int(arg))
    print(json.dumps({"backend": BACKEND, "seconds": dt,
                      "work": work, "unit": unit}))


def time_backend(spec: str, backend: str, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("AGENTMESH_PURE", None)
    if backend == "pure":
        env["AGENTMESH_PURE"] = "1"
    best = None
    for _ in range(repeat):
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--child", spec],
            env=env, capture_output=True, text=True, check=True)
        r = json.loads(out.stdout)
        if r["backend"] != backend:
            raise SystemExit(
                f"wanted the {backend} backend, got {r['backend']} -- "
                "is the extension built?")
        if best is None or r["seconds"] < best["seconds"]:
            best = r
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", action="append",
                    help="closure:N or scan:PKTS (repeatable)")
    ap.add_argument("--repeat", type=int, default=3,
                    help="runs per cell, best kept (default 3)")
    ap.add_argument("--child", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        run_child(args.child)
        return

    scenarios = args.scenario or ["closure:30", "closure:50", "scan:600"]
    print(f"{'scenario':<14} {'work':>16} {'native':>12} {'pure':>12} "
          f"{'speedup':>9}")
    for spec in scenarios:
        native = time_backend(spec, "native", args.repeat)
        pure = time_backend(spec, "pure", args.repeat)
        work = f"{native['work']} {native['unit']}"
        print(f"{spec:<14} {work:>16} {native['seconds'] * 1000:>9.0f} ms "
              f"{pure['seconds'] * 1000:>9.0f} ms "
              f"{pure['seconds'] / native['seconds']:>8.1f}x")


if __name__ == "__main__":
    main()
