"""Run configuration: a single human-editable JSON file with a schema version.

A config either names a builtin instance ("instance": "linear2d") or spells
out domain, regions, fields, and the dynamic explicitly. Serialization is
canonical (sorted keys, two-space indent), so parse-then-serialize is
idempotent and the certificate can pin the config by hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .certify import CertifyParams, StabilityInstance
from .dynamics import Inclusion
from .errors import ConfigError
from .fields import (
    ScalarField,
    combine,
    constant_field,
    linear_field,
    norm1,
    norm2,
    quadratic_form,
    radial_hinge,
    sqnorm,
)
from .games import DynamicSpec, builtin_game, gains_lyapunov_candidates, make_inclusion, matrix_game
from .geometry import (
    BallSet,
    BoxRegion,
    CompactDomain,
    Complement,
    Intersection,
    PointSet,
    Region,
    SublevelSet,
    SuperlevelSet,
    WholeDomain,
)
from .instances import BUILTIN_INSTANCES, _named_vector_field, make_instance, make_transitivity_instance
from .transitivity import TransitivityInstance

SCHEMA_VERSION = 1
MODES = ("certify", "transitive", "invariance", "simulate")
POLICY_NAMES = ("first", "mixture", "random", "adversarial")


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def config_hash(data: dict) -> str:
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


@dataclass
class RunConfig:
    mode: str
    name: str
    seed: int
    params: CertifyParams
    raw: dict
    output_dir: str | None = None
    instance: StabilityInstance | None = None
    transitivity: TransitivityInstance | None = None
    starts: np.ndarray | None = None
    n_sim_starts: int = 8
    sim_T: float = 10.0

    def canonical(self) -> str:
        return canonical_json(self.raw)

    def hash(self) -> str:
        return config_hash(self.raw)


# ---------------------------------------------------------------------------
# Builders


def build_domain(spec, where: str = "domain") -> CompactDomain:
    kind = _need(spec, "kind", where)
    if kind == "box":
        return CompactDomain.box(_need(spec, "bounds", where))
    if kind == "simplex":
        return CompactDomain.simplex(int(_need(spec, "dim", where)))
    raise ConfigError(where + ".kind", f"unknown domain kind {kind!r}")


def build_region(spec, domain: CompactDomain, where: str) -> Region:
    kind = _need(spec, "kind", where)
    if kind == "points":
        return PointSet(domain, _need(spec, "points", where))
    if kind == "ball":
        return BallSet(domain, [_need(spec, "center", where)],
                       float(_need(spec, "radius", where)),
                       open_flag=bool(spec.get("open", True)))
    if kind == "box":
        return BoxRegion(domain, _need(spec, "bounds", where),
                         open_flag=bool(spec.get("open", True)))
    if kind == "sublevel":
        return SublevelSet(domain, build_field(_need(spec, "field", where), domain,
                                               where + ".field"),
                           float(_need(spec, "level", where)))
    if kind == "superlevel":
        return SuperlevelSet(domain, build_field(_need(spec, "field", where), domain,
                                                 where + ".field"),
                             float(_need(spec, "level", where)))
    if kind == "intersection":
        parts = [build_region(s, domain, f"{where}.of[{i}]")
                 for i, s in enumerate(_need(spec, "of", where))]
        return Intersection(*parts)
    if kind == "complement":
        return Complement(build_region(_need(spec, "of", where), domain, where + ".of"))
    if kind == "whole":
        return WholeDomain(domain)
    raise ConfigError(where + ".kind", f"unknown region kind {kind!r}")


def build_field(spec, domain: CompactDomain, where: str) -> ScalarField:
    kind = _need(spec, "kind", where)
    dim = domain.dim
    if kind == "sqnorm":
        f = sqnorm(center=spec.get("center"), dim=dim)
    elif kind == "norm":
        f = norm2(center=spec.get("center"), dim=dim)
    elif kind == "norm1":
        f = norm1(center=spec.get("center"), dim=dim)
    elif kind == "quadratic":
        f = quadratic_form(_need(spec, "Q", where), center=spec.get("center"))
    elif kind == "linear":
        f = linear_field(_need(spec, "slope", where), offset=float(spec.get("offset", 0.0)))
    elif kind == "constant":
        f = constant_field(float(_need(spec, "value", where)))
    elif kind == "radial_hinge":
        f = radial_hinge(float(spec.get("coef_r2", 0.0)), float(spec.get("coef_hr", 0.0)),
                         float(spec.get("coef_h2", 0.0)), float(_need(spec, "knot", where)),
                         center=spec.get("center"), dim=dim,
                         coef_h1=float(spec.get("coef_h1", 0.0)))
    elif kind == "scaled":
        f = float(_need(spec, "factor", where)) * build_field(
            _need(spec, "of", where), domain, where + ".of")
    elif kind == "sum":
        parts = [build_field(s, domain, f"{where}.of[{i}]")
                 for i, s in enumerate(_need(spec, "of", where))]
        weights = spec.get("weights", [1.0] * len(parts))
        if len(weights) != len(parts):
            raise ConfigError(where + ".weights", "length differs from number of terms")
        f = combine(parts, [float(w) for w in weights])
    elif kind == "game_gains":
        game = build_game(_need(spec, "game", where), where + ".game")
        dyn = DynamicSpec(str(_need(spec, "dynamic", where)))
        W, W_tilde = gains_lyapunov_candidates(game, dyn)
        part = spec.get("part", "W")
        if part not in ("W", "W_tilde"):
            raise ConfigError(where + ".part", "must be 'W' or 'W_tilde'")
        f = W if part == "W" else W_tilde
    else:
        raise ConfigError(where + ".kind", f"unknown field kind {kind!r}")
    if spec.get("lsc"):
        f = replace(f, smoothness="lsc")
    return f


def build_game(spec, where: str):
    if "name" in spec:
        return builtin_game(spec["name"])
    if "matrix" in spec:
        return matrix_game(spec["matrix"], offset=spec.get("offset"),
                           name=spec.get("label", "matrix_game"))
    raise ConfigError(where, "game needs 'name' or 'matrix'")


def build_inclusion(spec, domain: CompactDomain, where: str) -> Inclusion:
    kind = _need(spec, "kind", where)
    if kind == "linear":
        A = np.asarray(_need(spec, "matrix", where), dtype=float)
        return Inclusion.from_ode(domain, lambda pts: pts @ A.T, name="linear")
    if kind == "named":
        name = _need(spec, "name", where)
        try:
            f = _named_vector_field(name)
        except KeyError as exc:
            raise ConfigError(where + ".name", str(exc)) from exc
        return Inclusion.from_ode(domain, f, name=name)
    if kind == "game":
        game = build_game(_need(spec, "game", where), where + ".game")
        dyn_spec = _need(spec, "dynamic", where)
        family = dyn_spec if isinstance(dyn_spec, str) else _need(dyn_spec, "family",
                                                                  where + ".dynamic")
        return make_inclusion(game, DynamicSpec(str(family)))
    raise ConfigError(where + ".kind", f"unknown inclusion kind {kind!r}")


def _need(spec, key: str, where: str):
    if not isinstance(spec, dict):
        raise ConfigError(where, f"expected an object, got {type(spec).__name__}")
    if key not in spec:
        raise ConfigError(f"{where}.{key}", "missing required field")
    return spec[key]


def _build_params(data: dict, seed: int) -> CertifyParams:
    num = data.get("numerics", {})
    if not isinstance(num, dict):
        raise ConfigError("numerics", "must be an object")
    p = CertifyParams(seed=seed)
    checks = {
        "h": (lambda v: 0 < v <= 0.5, "must be in (0, 0.5]"),
        "dt": (lambda v: 0 < v <= 0.01, "must be in (0, 0.01]"),
        "T_conv": (lambda v: v is None or v > 0, "must be positive"),
        "T_inv": (lambda v: v > 0, "must be positive"),
        "n_starts_inv": (lambda v: v >= 1, "must be >= 1"),
        "n_starts_traj": (lambda v: v >= 1, "must be >= 1"),
        "tol_conv": (lambda v: v > 0, "must be positive"),
        "conservative": (lambda v: isinstance(v, bool), "must be a boolean"),
    }
    for key, (ok, msg) in checks.items():
        if key in num:
            val = num[key]
            if key in ("n_starts_inv", "n_starts_traj"):
                val = int(val)
            elif key not in ("conservative", "T_conv") or (key == "T_conv" and val is not None):
                val = float(val) if key != "conservative" else val
            if not ok(val):
                raise ConfigError(f"numerics.{key}", msg)
            p = replace(p, **{key: val})
    if "policies" in num:
        pols = tuple(num["policies"])
        bad = [x for x in pols if x not in POLICY_NAMES]
        if bad:
            raise ConfigError("numerics.policies", f"unknown policies {bad}")
        p = replace(p, policies=pols)
    return p


def parse_config(data: dict) -> RunConfig:
    """Validate and build a run configuration; errors carry the field name."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}, got {version}")
    mode = data.get("mode", "certify")
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed", "must be an integer")
    params = _build_params(data, seed)

    cfg = RunConfig(
        mode=mode,
        name=str(data.get("name", data.get("instance", "run"))),
        seed=seed,
        params=params,
        raw=data,
        output_dir=data.get("output_dir"),
    )

    if mode == "transitive":
        cfg.transitivity = _parse_transitive(data, params)
        return cfg

    cfg.instance = _parse_instance(data, params)
    if mode == "simulate":
        sim = data.get("simulate", {})
        if "points" in sim:
            cfg.starts = np.asarray(sim["points"], dtype=float)
            if cfg.starts.ndim != 2 or cfg.starts.shape[1] != cfg.instance.domain.dim:
                raise ConfigError("simulate.points", "needs shape (n, dim)")
        cfg.n_sim_starts = int(sim.get("n", 8))
        cfg.sim_T = float(sim.get("T", 10.0))
        if cfg.sim_T <= 0:
            raise ConfigError("simulate.T", "must be positive")
    return cfg


def _parse_instance(data: dict, params: CertifyParams) -> StabilityInstance:
    if "instance" in data:
        name = data["instance"]
        if name not in BUILTIN_INSTANCES:
            raise ConfigError("instance", f"unknown builtin instance {name!r}")
        inst = make_instance(name)
        # Only explicitly configured numerics override the instance's own defaults.
        keys = set(data.get("numerics", {})) & {
            "h", "dt", "T_conv", "T_inv", "n_starts_inv", "n_starts_traj",
            "tol_conv", "policies", "conservative"}
        overrides = {k: getattr(params, k) for k in keys}
        overrides["seed"] = params.seed
        inst.params = replace(inst.params, **overrides)
        return inst
    domain = build_domain(_need(data, "domain", "<root>"))
    target = build_region(_need(data, "target", "<root>"), domain, "target")
    xprime = build_region(_need(data, "xprime", "<root>"), domain, "xprime")
    W = build_field(_need(data, "W", "<root>"), domain, "W")
    W_tilde = replace(build_field(_need(data, "W_tilde", "<root>"), domain, "W_tilde"),
                      smoothness="lsc")
    inc = build_inclusion(_need(data, "inclusion", "<root>"), domain, "inclusion")
    return StabilityInstance(
        name=str(data.get("name", "run")),
        target=target, xprime=xprime, W=W, W_tilde=W_tilde,
        inclusion=inc, params=params,
    )


def _parse_transitive(data: dict, params: CertifyParams) -> TransitivityInstance:
    if "instance" in data:
        name = data["instance"]
        try:
            inst = make_transitivity_instance(name)
        except KeyError as exc:
            raise ConfigError("instance", str(exc)) from exc
        inst.params = params
        return inst
    domain = build_domain(_need(data, "domain", "<root>"))
    target = build_region(_need(data, "target", "<root>"), domain, "target")
    x1 = build_region(_need(data, "x1", "<root>"), domain, "x1")
    x2 = build_region(_need(data, "x2", "<root>"), domain, "x2")
    fields = {}
    for key in ("W1", "W2", "W1_tilde", "W2_tilde"):
        fields[key] = build_field(_need(data, key, "<root>"), domain, key)
        if key.endswith("_tilde"):
            fields[key] = replace(fields[key], smoothness="lsc")
    inc = build_inclusion(_need(data, "inclusion", "<root>"), domain, "inclusion")
    return TransitivityInstance(
        name=str(data.get("name", "transitive_run")),
        target=target, x1=x1, x2=x2,
        W1=fields["W1"], W2=fields["W2"],
        W1_tilde=fields["W1_tilde"], W2_tilde=fields["W2_tilde"],
        inclusion=inc, params=params,
    )


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError("<file>", f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_config(data)
