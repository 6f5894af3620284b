"""End-to-end CLI workflow: write a config, run it, inspect, replay.

Every run directory contains certificate.json (the machine-readable
verdict), witnesses.csv (every violation found, one row each),
trajectories/*.csv (one integrated path per selector policy), and
plotdata/*.csv (level-set polylines and sampled region boundaries, ready
for any plotting tool).
"""

import json
import os
import tempfile

from basincert.cli import main

workdir = tempfile.mkdtemp(prefix="basincert_demo_")
config_path = os.path.join(workdir, "rotation.json")
out_dir = os.path.join(workdir, "out")

config = {
    "schema_version": 1,
    "mode": "invariance",
    "instance": "rotation_contraction",
    "seed": 0,
    "numerics": {"n_starts_inv": 60, "T_inv": 8.0},
}
with open(config_path, "w") as fh:
    json.dump(config, fh, indent=2)

print("$ basincert invariance --config rotation.json --out out/")
code = main(["invariance", "--config", config_path, "--out", out_dir])
print("exit code:", code, "(3 = escape witnesses found)\n")

with open(os.path.join(out_dir, "certificate.json")) as fh:
    cert = json.load(fh)
inv = cert["invariance"]
print("witnesses per policy:", inv["per_policy_escapes"])
first = inv["witnesses"][0]
print("first witness:", {k: first[k] for k in ("policy", "t", "state")})

print("\n$ basincert replay --certificate out/certificate.json --config rotation.json")
code = main(["replay", "--certificate", os.path.join(out_dir, "certificate.json"),
             "--config", config_path])
print("replay exit code:", code, "(0 = every witness reproduced)")

print("\nartifacts:")
for root, _, files in os.walk(out_dir):
    for f in sorted(files):
        rel = os.path.relpath(os.path.join(root, f), out_dir)
        print("  ", rel)
