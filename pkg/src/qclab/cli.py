"""Command-line surface: seeded, reproducible experiment runs with JSON and
CSV outputs.

Every run is described by a RunConfig (from flags or a key=value config
file), dispatched to the library, and recorded as a RunRecord whose payload
is deterministic for a fixed (config, seed).  Exit codes: 0 success,
1 usage error, 2 numerical non-convergence, 3 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

from . import contacto, geodesics, modulus, obstruction, planar, volume
from .geodesics import DirectBudget, NonConvergenceError, ResourceCapError
from .spaces import get_space

SCHEMA_VERSION = "qclab-run-1"
ARTIFACT_VERSION = "0.1.0"

COMMANDS = (
    "distance", "ball-volume", "growth-fit", "modulus", "loewner",
    "obstruction", "bounded-loewner", "contacto-check", "qi-estimate",
    "planar",
)


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    space: str = "heisenberg"
    Q: float = 4.0
    N: float = 3.0
    h: float = 0.1
    src: tuple = (0.0, 0.0, 0.0)
    dst: tuple = (1.0, 0.0, 0.0)
    method: str = "direct"
    radius: float = 1.0
    radii: tuple = ()
    t_list: tuple = (1.0, 0.5, 0.25)
    scale: float = 1.0
    indices: tuple = ()
    example: str = "exp_half_strip"
    lam: float = 1.5
    point: tuple = (0.5, 1.0)
    samples: int = 10000
    box: float = 50.0
    tol: float = 0.02
    seed: int = 0
    out_dir: str | None = None
    fmt: str = "json"

    def echo(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = list(v) if isinstance(v, tuple) else v
        return out


@dataclass
class RunRecord:
    config: dict
    payload: dict
    seed: int
    wall_time_s: float
    schema_version: str = SCHEMA_VERSION
    artifact_version: str = ARTIFACT_VERSION

    def to_json(self) -> str:
        body = {
            "schema_version": self.schema_version,
            "artifact_version": self.artifact_version,
            "seed": self.seed,
            "config": self.config,
            "payload": self.payload,
            "wall_time_s": self.wall_time_s,
        }
        return json.dumps(body, sort_keys=True, indent=2)

    def payload_bytes(self) -> bytes:
        """Deterministic byte serialization of the payload (no wall time)."""
        return json.dumps(self.payload, sort_keys=True).encode()


# --------------------------------------------------------------------------
# config files: plain "key = value" lines, lists comma-separated
# --------------------------------------------------------------------------

_FIELD_PARSERS = {
    "command": str, "space": str, "method": str, "example": str, "fmt": str,
    "out_dir": str,
    "Q": float, "N": float, "h": float, "radius": float, "scale": float,
    "lam": float, "tol": float, "box": float,
    "seed": int, "samples": int,
    "src": "floats", "dst": "floats", "radii": "floats", "t_list": "floats",
    "indices": "floats", "point": "floats",
}


def _parse_floats(text: str) -> tuple:
    return tuple(float(x) for x in str(text).replace(" ", "").split(",") if x != "")


def validate_config(path: str):
    """Parse a key=value config file into a RunConfig.

    Returns (RunConfig, []) on success or (None, errors); each error names
    the key, the offending value, and the violated constraint.
    """
    errors = []
    values: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        return None, [f"config: cannot read {path}: {exc}"]
    for ln, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {ln}: expected key = value, got {line!r}")
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _FIELD_PARSERS:
            errors.append(f"key {key!r}: unknown (value {val!r})")
            continue
        parser = _FIELD_PARSERS[key]
        try:
            values[key] = _parse_floats(val) if parser == "floats" else parser(val)
        except ValueError:
            errors.append(f"key {key!r}: value {val!r} is not a valid {parser}")
    if "command" not in values:
        errors.append("key 'command': missing (one of %s)" % ", ".join(COMMANDS))
    cfg = None
    if not errors:
        cfg = RunConfig(**values)
        errors.extend(validate_run_config(cfg))
        if errors:
            cfg = None
    return cfg, errors


def validate_run_config(cfg: RunConfig) -> list:
    errors = []
    if cfg.command not in COMMANDS:
        errors.append(f"key 'command': value {cfg.command!r} not in {COMMANDS}")
    try:
        get_space(cfg.space)
    except ValueError as exc:
        errors.append(f"key 'space': {exc}")
    if cfg.h <= 0:
        errors.append(f"key 'h': value {cfg.h} violates h > 0")
    if cfg.Q <= 1:
        errors.append(f"key 'Q': value {cfg.Q} violates Q > 1")
    if cfg.command in ("obstruction", "bounded-loewner") and not (cfg.N < cfg.Q):
        errors.append(f"key 'N': value {cfg.N} violates N < Q (Q = {cfg.Q})")
    if not (0 < cfg.tol < 0.5):
        errors.append(f"key 'tol': value {cfg.tol} violates 0 < tol < 0.5")
    if cfg.command == "planar" and not (1.0 < cfg.lam < 2.0):
        errors.append(f"key 'lam': value {cfg.lam} violates 1 < lam < 2")
    if cfg.seed < 0 or cfg.seed >= 2 ** 63:
        errors.append(f"key 'seed': value {cfg.seed} is not a 63-bit nonnegative integer")
    return errors


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def _payload_distance(cfg: RunConfig) -> dict:
    space = get_space(cfg.space)
    out = {}
    if cfg.method in ("direct", "both"):
        res = geodesics.cc_distance_direct(space, cfg.src, cfg.dst,
                                           DirectBudget(seed=cfg.seed))
        if not res.converged:
            raise NonConvergenceError(
                f"endpoint error {res.endpoint_error:.3g} above tolerance")
        out["direct"] = {"value": res.value, "endpoint_error": res.endpoint_error}
    if cfg.method in ("graph", "both"):
        res = geodesics.cc_distance_graph(space, cfg.src, cfg.dst, cfg.h)
        out["graph"] = {"value": res.value, "snap_error": res.endpoint_error}
    if cfg.method == "both":
        out["gap_hint"] = out["direct"]["value"] - out["graph"]["value"]
    if not out:
        raise UsageError(f"method must be direct, graph, or both, got {cfg.method!r}")
    return out


def _payload_ball_volume(cfg: RunConfig) -> dict:
    space = get_space(cfg.space)
    g = volume._ball_graph(space, cfg.src, cfg.radius, 14, 2, 3_000_000)
    val = volume.ball_volume(g, g.basepoint, cfg.radius)
    return {"radius": cfg.radius, "volume": val, "h": g.build_params.h,
            "n_nodes": g.n_nodes}


def _payload_growth_fit(cfg: RunConfig) -> dict:
    space = get_space(cfg.space)
    radii = cfg.radii or (0.5, 1.0, 2.0, 4.0)
    fit, rows = volume.growth_curve(space, cfg.src, radii)
    return {"fit": fit.to_dict(), "rows": rows}


def _payload_modulus(cfg: RunConfig) -> dict:
    fam = modulus.annulus_family(cfg.h if cfg.h < 0.2 else 0.04)
    res = modulus.q_modulus(fam, cfg.Q, tol=cfg.tol, seed=cfg.seed)
    payload = {"annulus": {**res.to_dict(), "seed": cfg.seed},
               "n_nodes": fam.graph.n_nodes}
    if cfg.out_dir and cfg.fmt == "csv":
        rows = [{"node": int(i), "x": float(p[0]), "y": float(p[1]),
                 "rho": float(r)}
                for i, (p, r) in enumerate(zip(fam.graph.nodes,
                                               res.density.values))]
        payload["density"] = rows
    return payload


def _payload_loewner(cfg: RunConfig) -> dict:
    space = get_space(cfg.space)
    samples = modulus.loewner_profile(space, cfg.Q, cfg.t_list, cfg.scale)
    return {"samples": [
        {"t": s.t, "separation": s.separation, "min_diam": s.min_diam,
         "modulus": s.modulus.to_dict()} for s in samples]}


def _strip_objects(rows: list) -> list:
    return [{k: v for k, v in r.items() if k not in ("pair", "family")} for r in rows]


def _payload_obstruction(cfg: RunConfig) -> dict:
    ecfg = obstruction.ExperimentConfig(Q=cfg.Q, N=cfg.N, h=cfg.h if cfg.h <= 2 else 1.0,
                                        indices=cfg.indices or None, seed=cfg.seed)
    rep = obstruction.run_obstruction_experiment(ecfg)
    rep["source_rows"] = _strip_objects(rep["source_rows"])
    return rep


def _payload_bounded_loewner(cfg: RunConfig) -> dict:
    params = obstruction.ObstructionParams(Q=cfg.Q, N=cfg.N, C0=6.0, R0=2.0,
                                           L=1.0, b=1.0)
    return obstruction.bounded_loewner_check(
        get_space(cfg.space).space_id, cfg.Q, params, cfg.t_list, h=cfg.h if cfg.h <= 2 else 1.0)


def _payload_contacto(cfg: RunConfig) -> dict:
    lo, hi = contacto.local_bilip_estimate(0.5, pairs=16, seed=cfg.seed)
    return {
        "samples": cfg.samples,
        "max_pullback_error": contacto.pullback_check(cfg.samples, seed=cfg.seed),
        "max_horizontality_defect": contacto.pushforward_horizontality_check(
            cfg.samples, seed=cfg.seed),
        "bilip_constants": [lo, hi],
    }


def _payload_qi(cfg: RunConfig) -> dict:
    est = obstruction.estimate_qi_constants(cfg.samples if cfg.samples >= 100 else 1000,
                                            cfg.box, seed=cfg.seed)
    return est.to_dict()


def _payload_planar(cfg: RunConfig) -> dict:
    out = {}
    if cfg.example in ("exp_half_strip", "exp_strip"):
        est = planar.dilatation_estimate(cfg.example, cfg.point, (1e-2, 1e-3))
        out["dilatation"] = {"point": list(cfg.point),
                             "radii": [1e-2, 1e-3],
                             "H_estimates": [float(x) for x in est.H_estimates],
                             "sup_estimate": est.sup_estimate}
    else:
        est = planar.dilatation_estimate("radial_stretch", cfg.point,
                                         (1e-2, 1e-3), lam=cfg.lam)
        out["dilatation"] = {"point": list(cfg.point),
                             "H_estimates": [float(x) for x in est.H_estimates],
                             "sup_estimate": est.sup_estimate}
        out["shape_fit_a"] = planar.shape_inclusion_fit(cfg.lam, 4000)
        fit = planar.stretched_strip_growth(cfg.lam, (10.0, 20.0, 40.0, 80.0), depth=10)
        out["growth"] = fit.to_dict()
    return out


_DISPATCH = {
    "distance": _payload_distance,
    "ball-volume": _payload_ball_volume,
    "growth-fit": _payload_growth_fit,
    "modulus": _payload_modulus,
    "loewner": _payload_loewner,
    "obstruction": _payload_obstruction,
    "bounded-loewner": _payload_bounded_loewner,
    "contacto-check": _payload_contacto,
    "qi-estimate": _payload_qi,
    "planar": _payload_planar,
}


def dispatch(cfg: RunConfig) -> RunRecord:
    """Validate, route, and record one command."""
    errors = validate_run_config(cfg)
    if errors:
        raise UsageError("; ".join(errors))
    t0 = time.perf_counter()
    payload = _DISPATCH[cfg.command](cfg)
    record = RunRecord(config=cfg.echo(), payload=payload, seed=cfg.seed,
                       wall_time_s=time.perf_counter() - t0)
    if cfg.out_dir:
        write_record(record, cfg)
    return record


def _atomic_write(path: str, data: str) -> None:
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_rows(payload: dict) -> list:
    """Flatten list-of-dict sections into CSV rows."""
    rows = []
    for key, val in payload.items():
        if isinstance(val, list) and val and isinstance(val[0], dict):
            for item in val:
                flat = {"section": key}
                for k, v in item.items():
                    if isinstance(v, dict):
                        for kk, vv in v.items():
                            flat[f"{k}_{kk}"] = vv
                    elif not isinstance(v, (list, tuple)):
                        flat[k] = v
                rows.append(flat)
    return rows


def write_record(record: RunRecord, cfg: RunConfig) -> str:
    out_dir = os.environ.get("QCLAB_OUT_DIR", cfg.out_dir)
    base = os.path.join(out_dir, f"{cfg.command}-seed{cfg.seed}")
    _atomic_write(base + ".json", record.to_json())
    if cfg.fmt == "csv":
        rows = _csv_rows(record.payload)
        if rows:
            keys = sorted({k for r in rows for k in r})
            buf = io.StringIO()
            writer = csv.DictWriter(buf, fieldnames=keys)
            writer.writeheader()
            writer.writerows(rows)
            _atomic_write(base + ".csv", buf.getvalue())
    return base + ".json"


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    return _parse_floats(text)


def build_parser() -> _Parser:
    p = _Parser(prog="qclab", description=__doc__)
    p.add_argument("--config", help="key=value config file; flags override")
    sub = p.add_subparsers(dest="command")
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")

    d = sub.add_parser("distance", parents=[common])
    d.add_argument("--space", default="heisenberg")
    d.add_argument("--from", dest="src", type=_floats, default=(0.0, 0.0, 0.0))
    d.add_argument("--to", dest="dst", type=_floats, default=(1.0, 0.0, 0.0))
    d.add_argument("--method", choices=("direct", "graph", "both"), default="direct")
    d.add_argument("--h", type=float, default=0.05)

    bv = sub.add_parser("ball-volume", parents=[common])
    bv.add_argument("--space", default="heisenberg")
    bv.add_argument("--center", dest="src", type=_floats, default=(0.0, 0.0, 0.0))
    bv.add_argument("--radius", type=float, default=1.0)

    gf = sub.add_parser("growth-fit", parents=[common])
    gf.add_argument("--space", default="heisenberg")
    gf.add_argument("--radii", type=_floats, default=(0.5, 1.0, 2.0, 4.0))

    m = sub.add_parser("modulus", parents=[common])
    m.add_argument("--Q", type=float, default=2.0)
    m.add_argument("--h", type=float, default=0.04)
    m.add_argument("--tol", type=float, default=0.02)

    lw = sub.add_parser("loewner", parents=[common])
    lw.add_argument("--space", default="heisenberg")
    lw.add_argument("--Q", type=float, default=4.0)
    lw.add_argument("--t-list", dest="t_list", type=_floats, default=(1.0, 0.5, 0.25))
    lw.add_argument("--scale", type=float, default=1.0)

    ob = sub.add_parser("obstruction", parents=[common])
    ob.add_argument("--Q", type=float, default=4.0)
    ob.add_argument("--N", type=float, default=3.0)
    ob.add_argument("--h", type=float, default=1.0)
    ob.add_argument("--indices", type=_floats, default=())

    bl = sub.add_parser("bounded-loewner", parents=[common])
    bl.add_argument("--space", default="rototranslation")
    bl.add_argument("--Q", type=float, default=4.0)
    bl.add_argument("--N", type=float, default=3.0)
    bl.add_argument("--t-list", dest="t_list", type=_floats, default=(1.0, 0.5, 0.25))
    bl.add_argument("--h", type=float, default=1.0)

    cc = sub.add_parser("contacto-check", parents=[common])
    cc.add_argument("--samples", type=int, default=10000)

    qi = sub.add_parser("qi-estimate", parents=[common])
    qi.add_argument("--samples", type=int, default=1000)
    qi.add_argument("--box", type=float, default=50.0)

    pl = sub.add_parser("planar", parents=[common])
    pl.add_argument("--example", default="exp_half_strip",
                    choices=("exp_half_strip", "exp_strip", "radial_stretch"))
    pl.add_argument("--lam", type=float, default=1.5)
    pl.add_argument("--point", type=_floats, default=(0.5, 1.0))
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.config:
            cfg, errors = validate_config(ns.config)
            if errors:
                for e in errors:
                    print(f"config error: {e}", file=sys.stderr)
                return 1
        elif ns.command is None:
            raise UsageError("a command or --config is required")
        else:
            fields = {k: v for k, v in vars(ns).items()
                      if k not in ("config",) and v is not None}
            cfg = RunConfig(**fields)
        record = dispatch(cfg)
        print(record.to_json())
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 2
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
