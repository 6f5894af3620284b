"""Certificate and trajectory persistence, plot-data emission, witness replay.

All writes are atomic (temp file in the target directory, then rename), so an
interrupted run never leaves a partial certificate at the final path. Output
is data only: JSON for the certificate, CSV for everything plottable.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from datetime import datetime, timezone

import numpy as np

from .certify import Certificate
from .config import RunConfig, canonical_json, config_hash
from .dynamics import SelectorPolicy, integrate
from .errors import SchemaMismatch
from .fields import distance_field

SCHEMA_VERSION = 1

# Barycentric corners for projecting 3-simplex data into the plane.
_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def certificate_payload(cert: Certificate, config: RunConfig) -> dict:
    payload = cert.to_dict()
    payload["mode"] = config.mode
    payload["seed"] = config.seed
    payload["config"] = config.raw
    payload["config_hash"] = config.hash()
    payload["created_at"] = datetime.now(timezone.utc).isoformat()
    return payload


def invariance_payload(report, config: RunConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": config.mode,
        "instance": config.name,
        "overall": "pass" if report.invariant else "fail",
        "claim": report.verdict,
        "invariance": report.to_dict(),
        "hypotheses": {},
        "seed": config.seed,
        "config": config.raw,
        "config_hash": config.hash(),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }


def write_certificate(payload: dict, outdir: str) -> str:
    path = os.path.join(outdir, "certificate.json")
    atomic_write(path, canonical_json(payload))
    return path


# ---------------------------------------------------------------------------
# Witness CSV


def collect_witnesses(payload: dict) -> list[dict]:
    rows = []
    for name, verdict in (payload.get("hypotheses") or {}).items():
        if not verdict:
            continue
        for w in verdict.get("witnesses", []):
            rows.append({"stage": "hypothesis", "check": name, "policy": "",
                         "index": "", "t": "", **_point_cols(w)})
    trans = payload.get("transitivity") or {}
    for name, verdict in (trans.get("conditions") or {}).items():
        for w in verdict.get("witnesses", []):
            rows.append({"stage": "transitivity", "check": name, "policy": "",
                         "index": "", "t": "", **_point_cols(w)})
    inv = payload.get("invariance") or {}
    for w in inv.get("witnesses", []):
        rows.append({
            "stage": "invariance", "check": "forward_invariance",
            "policy": w.get("policy", ""), "index": w.get("start_index", ""),
            "t": w.get("t", ""), **_point_cols({"point": w.get("state")}),
        })
    traj = payload.get("trajectories") or {}
    for name in ("monotone_decrease", "convergence"):
        verdict = traj.get(name)
        if not verdict:
            continue
        for w in verdict.get("witnesses", []):
            rows.append({"stage": "trajectory", "check": name,
                         "policy": w.get("policy", ""), "index": w.get("index", ""),
                         "t": w.get("t", ""), **_point_cols(w)})
    return rows


def _point_cols(w: dict) -> dict:
    point = w.get("point") or w.get("start") or []
    cols = {f"x{i + 1}": v for i, v in enumerate(point or [])}
    extras = {k: v for k, v in w.items()
              if k not in ("point", "start") and not isinstance(v, (list, dict))}
    cols["detail"] = ";".join(f"{k}={v}" for k, v in sorted(extras.items()))
    return cols


def write_witnesses_csv(payload: dict, outdir: str) -> str:
    rows = collect_witnesses(payload)
    fieldnames = ["stage", "check", "policy", "index", "t"]
    dims = max((len([k for k in r if k.startswith("x")]) for r in rows), default=0)
    fieldnames += [f"x{i + 1}" for i in range(dims)] + ["detail"]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, extrasaction="ignore")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    path = os.path.join(outdir, "witnesses.csv")
    atomic_write(path, buf.getvalue())
    return path


# ---------------------------------------------------------------------------
# Trajectory CSV


def write_trajectory_csv(traj, outdir: str, name: str, fields: dict | None = None) -> str:
    """t, x1..xA, selector index, then one column per attached field."""
    fields = fields or {}
    dim = traj.states.shape[1]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["t"] + [f"x{i + 1}" for i in range(dim)] + ["selector"]
                    + list(fields))
    values = {name: f(traj.states) for name, f in fields.items()}
    selectors = np.append(traj.selectors, -9)  # no selection made at the final state
    for k in range(len(traj.times)):
        row = [f"{traj.times[k]:.9g}"] + [f"{x:.12g}" for x in traj.states[k]]
        row.append(int(selectors[k]))
        row += [f"{values[n][k]:.12g}" for n in fields]
        writer.writerow(row)
    path = os.path.join(outdir, "trajectories", f"{name}.csv")
    atomic_write(path, buf.getvalue())
    return path


def export_trajectories(config: RunConfig, outdir: str, starts=None,
                        T: float | None = None) -> list[str]:
    """One recorded trajectory per selector policy from a shared start."""
    inst = config.instance
    if inst is None:
        return []
    p = inst.params
    if starts is None:
        core_or_xprime = inst.xprime
        starts = core_or_xprime.sample(p.h)
        if len(starts) == 0:
            return []
        starts = starts[:1]
    horizon = T if T is not None else min(p.T_conv or p.T_inv, 50.0)
    d_star = distance_field(inst.target, h=p.h)
    paths = []
    written = set()
    for pol in p.policies:
        policy = (SelectorPolicy("adversarial", d_star) if pol == "adversarial"
                  else SelectorPolicy(pol))
        traj = integrate(inst.inclusion, starts[0], horizon, p.dt, policy=policy,
                         seed=p.seed)
        if policy.kind in written:
            continue
        written.add(policy.kind)
        paths.append(write_trajectory_csv(
            traj, outdir, policy.kind,
            fields={"W": inst.W, "W_tilde": inst.W_tilde, "dist": d_star}))
    return paths


# ---------------------------------------------------------------------------
# Plot data


def _project(points: np.ndarray) -> np.ndarray:
    """Simplex points to the plane via barycentric corners; 2-D box unchanged."""
    if points.shape[1] == 2:
        return points
    if points.shape[1] == 3:
        return points @ _TRIANGLE
    return points[:, :2]


def write_plotdata(config: RunConfig, cert: Certificate | None, outdir: str) -> list[str]:
    inst = config.instance
    if inst is None:
        return []
    paths = []
    h = inst.params.h
    domain = inst.domain
    # Level-set polylines for 2-D boxes.
    if (cert is not None and cert.construction is not None
            and domain.kind == "box" and domain.dim == 2):
        paths.append(_write_levels(inst, cert, outdir))
    # Sampled region boundaries.
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["region", "u", "v"])
    regions = {"xprime": inst.xprime}
    if cert is not None and cert.construction is not None:
        regions["core"] = cert.construction.core
    for name, region in regions.items():
        for pt in _project(np.atleast_2d(region.boundary_adjacent(h))):
            writer.writerow([name, f"{pt[0]:.9g}", f"{pt[1]:.9g}"])
    path = os.path.join(outdir, "plotdata", "boundaries.csv")
    atomic_write(path, buf.getvalue())
    paths.append(path)
    return paths


def _write_levels(inst, cert: Certificate, outdir: str) -> str:
    import contourpy

    cons = cert.construction
    domain = inst.domain
    (x_lo, x_hi), (y_lo, y_hi) = domain.bounds
    n = 201
    xs = np.linspace(x_lo, x_hi, n)
    ys = np.linspace(y_lo, y_hi, n)
    XX, YY = np.meshgrid(xs, ys)
    Z = inst.W(np.stack([XX.ravel(), YY.ravel()], axis=1)).reshape(n, n)
    gen = contourpy.contour_generator(x=XX, y=YY, z=Z)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["level", "segment", "u", "v"])
    for level in (cons.level, cons.w_bar):
        for seg_id, line in enumerate(gen.lines(level)):
            for pt in line:
                writer.writerow([f"{level:.12g}", seg_id, f"{pt[0]:.9g}", f"{pt[1]:.9g}"])
    path = os.path.join(outdir, "plotdata", "levels.csv")
    atomic_write(path, buf.getvalue())
    return path


def write_overlay(config: RunConfig, outdir: str, T: float | None = None) -> str | None:
    """Trajectory overlays as columns: t, then u/v per selector policy."""
    inst = config.instance
    if inst is None:
        return None
    p = inst.params
    starts = inst.xprime.sample(p.h)
    if len(starts) == 0:
        return None
    horizon = T if T is not None else min(p.T_conv or p.T_inv, 20.0)
    d_star = distance_field(inst.target, h=p.h)
    columns = {}
    times = None
    for pol in p.policies:
        policy = (SelectorPolicy("adversarial", d_star) if pol == "adversarial"
                  else SelectorPolicy(pol))
        traj = integrate(inst.inclusion, starts[0], horizon, p.dt, policy=policy,
                         seed=p.seed)
        proj = _project(traj.states)
        stride = max(1, len(traj.times) // 2000)
        times = traj.times[::stride]
        columns[f"u_{policy.kind}"] = proj[::stride, 0]
        columns[f"v_{policy.kind}"] = proj[::stride, 1]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["t"] + list(columns))
    for k in range(len(times)):
        writer.writerow([f"{times[k]:.9g}"] + [f"{columns[c][k]:.9g}" for c in columns])
    path = os.path.join(outdir, "plotdata", "trajectory_overlay.csv")
    atomic_write(path, buf.getvalue())
    return path


# ---------------------------------------------------------------------------
# Replay


def replay(certificate_path: str, config_path: str | None = None) -> tuple[bool, str]:
    """Re-run the recorded configuration with its seeds and confirm every
    recorded witness reproduces. Returns (ok, message).

    Raises SchemaMismatch when the schema version or the config hash drifted
    (the certificate no longer describes the given config).
    """
    import json

    from .cli import execute  # late import: cli builds on reports

    with open(certificate_path) as fh:
        recorded = json.load(fh)
    if recorded.get("schema_version") != SCHEMA_VERSION:
        raise SchemaMismatch(
            f"certificate schema {recorded.get('schema_version')} != {SCHEMA_VERSION}")
    if config_path is not None:
        with open(config_path) as fh:
            on_disk = json.load(fh)
        if config_hash(on_disk) != recorded.get("config_hash"):
            raise SchemaMismatch("config hash differs from the one recorded in the "
                                 "certificate; the config was edited after the run")
        config_data = on_disk
    else:
        config_data = recorded.get("config")
        if config_data is None:
            raise SchemaMismatch("certificate carries no embedded config")

    recorded_witnesses = collect_witnesses(recorded)
    if not recorded_witnesses:
        return True, "no recorded witnesses; replay passes vacuously"

    from .config import parse_config

    fresh_payload, _ = execute(parse_config(config_data), outdir=None)
    fresh = collect_witnesses(fresh_payload)
    fresh_keys = {_witness_key(w) for w in fresh}
    missing = [w for w in recorded_witnesses if _witness_key(w) not in fresh_keys]
    if missing:
        return False, (f"{len(missing)} of {len(recorded_witnesses)} recorded "
                       f"witnesses did not reproduce; first: {missing[0]}")
    return True, f"all {len(recorded_witnesses)} witnesses reproduced"


def _witness_key(w: dict) -> tuple:
    return tuple(sorted((k, str(v)) for k, v in w.items()))
