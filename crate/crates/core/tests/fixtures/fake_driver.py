#!/usr/bin/env python3
"""Line-delimited JSON driver used by the integration tests.

usage: fake_driver.py SCHEMA MODE N
MODE is ok, error, hang, crash or garbage; the chosen misbehaviour happens
on the N-th request this process receives.
"""
import json
import signal
import sys
import time

signal.signal(signal.SIGPIPE, signal.SIG_DFL)

schema = json.load(open(sys.argv[1]))
entries = schema["entries"] if isinstance(schema, dict) else schema
mode, nth = sys.argv[2], int(sys.argv[3])

seen = 0
for line in sys.stdin:
    if not line.strip():
        continue
    seen += 1
    req = json.loads(line)
    if seen == nth and mode == "hang":
        time.sleep(60)
    if seen == nth and mode == "crash":
        sys.exit(3)
    if seen == nth and mode == "garbage":
        print("this is not json", flush=True)
        continue
    if seen == nth and mode == "error":
        print(json.dumps({"error": "benchmark aborted"}), flush=True)
        continue
    trial = int(req["trial_id"], 16)
    pool = req["config"]["innodb_buffer_pool_size"]
    frames = []
    for t in range(4):
        values = []
        for i, e in enumerate(entries):
            values.append(float(1000 + 10 * t + i) if e["agg"] == "counter" else float(i + (trial % 7)))
        frames.append({"t": 5.0 * (t + 1), "values": values})
    tps = 1000.0 + pool / 2**30
    print(json.dumps({"frames": frames, "perf": {"tps": tps, "p95_ms": 10.0, "qps": 20 * tps}}), flush=True)
