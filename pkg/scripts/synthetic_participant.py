#!/usr/bin/env python3
"""Run a scripted participant against a running experiment server.

Completes the full naming -> rating -> preference session with plausible
synthetic responses, then downloads the per-session export.

Usage:
    python3 scripts/synthetic_participant.py [--base-url http://127.0.0.1:8571]
        [--participant 0] [--seed 0] [--out human.csv]
"""

from __future__ import annotations

import argparse
import json
import sys
import urllib.request

import numpy as np


def call(base, path, payload=None):
    url = base + path
    if payload is None:
        with urllib.request.urlopen(url) as resp:
            return json.loads(resp.read())
    req = urllib.request.Request(
        url, data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"}, method="POST")
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def respond(trial, rng):
    if trial["task"] == "NAMING":
        # occasionally misname to exercise the error flag
        name = trial["object"] if rng.random() > 0.05 else "unknown"
        return {"name": name, "latency_ms": float(rng.normal(650, 80).clip(200))}
    if trial["task"] == "RATING":
        # rougher simplifications tend to earn lower ratings
        base = 5 if trial["simp_level"] == 50 else 3
        return {"rating": int(np.clip(base + rng.integers(-1, 2), 1, 7))}
    return {"choice": "left" if rng.random() < 0.6 else "right"}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--base-url", default="http://127.0.0.1:8571")
    ap.add_argument("--participant", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="write the session export here")
    args = ap.parse_args()

    rng = np.random.default_rng((args.seed, args.participant))
    session = call(args.base_url, "/api/v1/sessions",
                   {"participant_index": args.participant, "seed": args.seed})
    sid = session["session_id"]
    print(f"session {sid}")
    n = 0
    while True:
        nxt = call(args.base_url, f"/api/v1/sessions/{sid}/next")
        if nxt["complete"]:
            break
        trial = nxt["trial"]
        call(args.base_url, f"/api/v1/sessions/{sid}/responses",
             {"trial_id": trial["trial_id"], "payload": respond(trial, rng),
              "token": f"syn-{sid}-{n}"})
        n += 1
    print(f"completed {n} trials")
    if args.out:
        with urllib.request.urlopen(
                f"{args.base_url}/api/v1/sessions/{sid}/export") as resp:
            data = resp.read()
        with open(args.out, "wb") as fh:
            fh.write(data)
        print(f"export written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
