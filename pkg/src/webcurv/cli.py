"""``webcurv`` command line front-end.

Exit codes: 0 success, 1 check failure, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import traceforms as T
from .connection import MAX_D, WebAtPoint
from .errors import WebCurvError, WebFileError
from .expr import check_transversality, eval_jet, load_web

log = logging.getLogger("webcurv")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

DEFAULT_TOL = 1e-6
DEFAULT_GRID = (0.1, 0.9, 5, 0.1, 0.9, 5)
#: points closer than this to a detected degeneracy locus are skipped
NEAR_DEGENERACY = 1e-3


@dataclass
class RunConfig:
    command: str
    web_path: str
    points: list = field(default_factory=list)
    grid: tuple = None
    triple: tuple = None
    all_triples: bool = False
    tol: float = DEFAULT_TOL
    jet_order: int = None
    out: str = None
    format: str = "json"

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.grid is not None and (self.grid[2] < 1 or self.grid[5] < 1):
            raise ValueError("grid counts must be >= 1")
        if self.format not in ("json", "csv"):
            raise ValueError(f"unknown format {self.format!r}")

    def all_points(self):
        pts = [tuple(p) for p in self.points]
        grid = self.grid
        if grid is None and not pts:
            grid = DEFAULT_GRID
        if grid is not None:
            x0, x1, nx, y0, y1, ny = grid
            for y in np.linspace(y0, y1, int(ny)):
                for x in np.linspace(x0, x1, int(nx)):
                    pts.append((float(x), float(y)))
        return pts

    def as_dict(self):
        return {"command": self.command, "web": self.web_path, "grid": self.grid,
                "points": [list(p) for p in self.points], "triple": self.triple,
                "all_triples": self.all_triples, "tol": self.tol,
                "jet_order": self.jet_order, "format": self.format}


# -- admissibility -------------------------------------------------------------

def degeneracy_reason(web, point, pairs=None):
    """Skip reason for ``point`` or None when every relevant pair is safely transverse."""
    for v in check_transversality(web, point):
        if pairs is not None and (v.i, v.j) not in pairs:
            continue
        if v.reason == "vanishing-gradient":
            return f"VanishingGradient: pair ({v.i},{v.j})"
        if v.degenerate:
            return f"SlopeCollision: f{v.i} and f{v.j} are parallel here"
    # first-order distance to the zero set of each Jacobian determinant
    jets = [eval_jet(e, point, 2) for e in web.integrals]
    for i, j in combinations(range(web.d), 2):
        if pairs is not None and (i + 1, j + 1) not in pairs:
            continue
        fi, fj = jets[i].coeffs, jets[j].coeffs
        det = fi[1, 0] * fj[0, 1] - fi[0, 1] * fj[1, 0]
        ddx = (2 * fi[2, 0] * fj[0, 1] + fi[1, 0] * fj[1, 1]
               - fi[1, 1] * fj[1, 0] - fi[0, 1] * 2 * fj[2, 0])
        ddy = (fi[1, 1] * fj[0, 1] + fi[1, 0] * 2 * fj[0, 2]
               - 2 * fi[0, 2] * fj[1, 0] - fi[0, 1] * fj[1, 1])
        grad = math.hypot(ddx, ddy)
        if grad > 0 and abs(det) / grad < NEAR_DEGENERACY:
            return (f"NearDegeneracy: within ~{abs(det) / grad:.1e} of the locus where "
                    f"f{i + 1} and f{j + 1} are parallel")
    return None


def _skip(x, y, reason):
    return {"x": x, "y": y, "ok": False, "skip_reason": reason}


def _reason(exc):
    return f"{type(exc).__name__}: {exc}"


# -- commands --------------------------------------------------------------------

def cmd_check(web, cfg):
    records, bad = [], False
    for x, y in cfg.all_points():
        try:
            verdicts = check_transversality(web, (x, y))
        except WebCurvError as exc:
            records.append(_skip(x, y, _reason(exc)))
            bad = True
            continue
        degenerate = [v for v in verdicts if v.degenerate]
        bad |= bool(degenerate)
        records.append({
            "x": x, "y": y, "ok": not degenerate,
            "pairs": [{"i": v.i, "j": v.j, "det": v.det,
                       "verdict": "DEGENERATE" if v.degenerate else "transverse",
                       "reason": v.reason} for v in verdicts]})
    summary = {"n_points": len(records),
               "n_degenerate": sum(not r["ok"] for r in records)}
    return records, summary, EXIT_FAIL if bad else EXIT_OK


def cmd_curvature(web, cfg):
    records, fail = [], False
    two_paths = []
    for x, y in cfg.all_points():
        reason = degeneracy_reason(web, (x, y))
        if reason:
            records.append(_skip(x, y, reason))
            continue
        try:
            wp = WebAtPoint.from_web(web, (x, y), cfg.jet_order)
            conn = wp.curvature()
            tr_prop = T.trace_via_proposition(wp).coeff
        except WebCurvError as exc:
            records.append(_skip(x, y, _reason(exc)))
            continue
        two_path = T.relative(conn.trace_K, tr_prop)
        two_paths.append(two_path)
        fail |= two_path > cfg.tol
        for w in conn.warnings:
            log.warning("(%g, %g): %s", x, y, w)
        records.append({
            "x": x, "y": y, "ok": True, "trace_K": conn.trace_K, "trace_prop": tr_prop,
            "residual": two_path, "K": conn.K.tolist(),
            "last_row_only": conn.rows_above_last <= 1e-7,
            "warnings": conn.warnings})
    summary = _summary(records, two_paths, "max_two_path_residual")
    return records, summary, EXIT_FAIL if fail else EXIT_OK


def cmd_trace_check(web, cfg):
    records, residuals = [], []
    for x, y in cfg.all_points():
        reason = degeneracy_reason(web, (x, y))
        if reason:
            records.append(_skip(x, y, reason))
            continue
        pc = T.check_point(web, (x, y), cfg.jet_order)
        if not pc.ok:
            records.append(_skip(x, y, pc.skip_reason))
            continue
        residuals.append(pc.residual)
        records.append({"x": x, "y": y, "ok": True, "trace_K": pc.trace_K,
                        "trace_prop": pc.trace_prop, "SC": pc.SC,
                        "residual": pc.residual, "two_path": pc.two_path})
    summary = _summary(records, residuals, "max_residual")
    summary["median_residual"] = float(np.median(residuals)) if residuals else 0.0
    summary["tol"] = cfg.tol
    ok = all(r <= cfg.tol for r in residuals)
    return records, summary, EXIT_OK if ok else EXIT_FAIL


def _triples(web, cfg):
    if cfg.all_triples:
        return [tuple(t) for t in combinations(range(1, web.d + 1), 3)]
    i, j, k = cfg.triple or (1, 2, 3)
    if not 1 <= i < j < k <= web.d:
        raise ValueError(f"triple must satisfy 1 <= i < j < k <= {web.d}, got {(i, j, k)}")
    return [(i, j, k)]


def cmd_blaschke(web, cfg):
    triples = _triples(web, cfg)
    pairs = {p for t in triples for p in combinations(t, 2)}
    records = []
    for x, y in cfg.all_points():
        reason = degeneracy_reason(web, (x, y), pairs)
        if reason:
            records.append(_skip(x, y, reason))
            continue
        order = cfg.jet_order or 4
        try:
            jets = web.jets((x, y), order)
            out = []
            for i, j, k in triples:
                c = T.blaschke(jets[i - 1], jets[j - 1], jets[k - 1]).coeff
                out.append({"i": i, "j": j, "k": k, "coeff": c})
        except WebCurvError as exc:
            records.append(_skip(x, y, _reason(exc)))
            continue
        rec = {"x": x, "y": y, "ok": True, "blaschke": out}
        if cfg.all_triples:
            rec["SC"] = math.fsum(b["coeff"] for b in out)
        records.append(rec)
    return records, _summary(records), EXIT_OK


def cmd_gamma(web, cfg):
    records = []
    for x, y in cfg.all_points():
        reason = degeneracy_reason(web, (x, y))
        if reason:
            records.append(_skip(x, y, reason))
            continue
        try:
            jets = web.jets((x, y), cfg.jet_order or web.d + 1)
            prefixes = [{"r": r, **_te(T.gamma(jets[:r]))} for r in range(3, web.d + 1)]
        except WebCurvError as exc:
            records.append(_skip(x, y, _reason(exc)))
            continue
        records.append({"x": x, "y": y, "ok": True, "gamma": prefixes[-1],
                        "prefixes": prefixes})
    return records, _summary(records), EXIT_OK


def _te(te):
    return {"value": te.value, "dx": te.dx, "dy": te.dy}


def _summary(records, values=None, key=None):
    out = {"n_points": len(records), "n_ok": sum(r["ok"] for r in records),
           "n_skipped": sum(not r["ok"] for r in records)}
    if key is not None:
        out[key] = max(values) if values else 0.0
    return out


COMMANDS = {"check": cmd_check, "curvature": cmd_curvature, "trace-check": cmd_trace_check,
            "blaschke": cmd_blaschke, "gamma": cmd_gamma}


# -- output ------------------------------------------------------------------------

CSV_FIELDS = ["x", "y", "ok", "skip_reason", "trace_K", "trace_prop", "SC", "residual",
              "two_path"]


def render(report, fmt):
    if fmt == "json":
        return json.dumps(report, indent=2, default=_json_default) + "\n"
    buf = io.StringIO()
    if report["config"]["command"] == "blaschke":
        fields = ["x", "y", "ok", "skip_reason", "i", "j", "k", "coeff"]
        w = csv.DictWriter(buf, fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for p in report["points"]:
            for b in p.get("blaschke", [{}]):
                w.writerow({**p, **b})
    elif report["config"]["command"] == "check":
        w = csv.DictWriter(buf, ["x", "y", "ok", "i", "j", "det", "verdict"],
                           extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for p in report["points"]:
            for v in p.get("pairs", [{}]):
                w.writerow({**p, **v})
    else:
        fields = CSV_FIELDS + (["gamma", "gamma_dx", "gamma_dy"]
                               if report["config"]["command"] == "gamma" else [])
        w = csv.DictWriter(buf, fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for p in report["points"]:
            row = dict(p)
            if "gamma" in p:
                row.update(gamma=p["gamma"]["value"], gamma_dx=p["gamma"]["dx"],
                           gamma_dy=p["gamma"]["dy"])
            w.writerow(row)
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


# -- argument parsing ------------------------------------------------------------------

def _floats(n):
    def conv(text):
        parts = text.split(",")
        if len(parts) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers")
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None
    return conv


def _grid(text):
    x0, x1, nx, y0, y1, ny = _floats(6)(text)
    if nx != int(nx) or ny != int(ny) or nx < 1 or ny < 1:
        raise argparse.ArgumentTypeError("grid counts must be positive integers")
    return (x0, x1, int(nx), y0, y1, int(ny))


def _triple(text):
    vals = _floats(3)(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError("triple indices must be integers")
    return tuple(int(v) for v in vals)


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser():
    p = argparse.ArgumentParser(
        prog="webcurv",
        description="Curvature, trace elements and Blaschke curvatures of planar webs.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("webfile")
    p.add_argument("--point", action="append", type=_floats(2), default=[],
                   metavar="X,Y", help="evaluation point (repeatable)")
    p.add_argument("--grid", type=_grid, metavar="X0,X1,NX,Y0,Y1,NY")
    p.add_argument("--triple", type=_triple, metavar="I,J,K")
    p.add_argument("--all-triples", action="store_true")
    p.add_argument("--tol", type=_positive, default=DEFAULT_TOL)
    p.add_argument("--jet-order", type=int, metavar="K")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return p


VALUE_FLAGS = ("--point", "--grid", "--triple", "--tol")


def _glue_values(argv):
    # "--grid -1,1,5,..." would otherwise read the value as an option
    out, it = [], iter(argv)
    for tok in it:
        if tok in VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run(argv=None):
    """Run the CLI; returns ``(exit_code, report)``."""
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_values(argv))
    try:
        cfg = RunConfig(args.command, args.webfile, args.point, args.grid, args.triple,
                        args.all_triples, args.tol, args.jet_order, args.out, args.format)
        web = load_web(cfg.web_path)
        if web.d > MAX_D and cfg.command != "check":
            raise ValueError(f"webs with more than {MAX_D} integrals are not supported")
        if cfg.jet_order is not None and cfg.command in ("curvature", "trace-check", "gamma") \
                and cfg.jet_order < web.d:
            raise ValueError(f"--jet-order must be at least d = {web.d}")
        if cfg.jet_order is not None and cfg.jet_order < 3:
            raise ValueError("--jet-order must be at least 3")
        records, summary, code = COMMANDS[cfg.command](web, cfg)
    except (WebFileError, ValueError) as exc:
        print(f"webcurv: error: {exc}", file=sys.stderr)
        return EXIT_INPUT, None
    report = {"web": {"labels": list(web.labels), "integrals": web.texts()},
              "config": cfg.as_dict(), "points": [_clean(r) for r in records],
              "summary": summary}
    text = render(report, cfg.format)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code, report


def _clean(rec):
    return {k: v for k, v in rec.items()
            if v is not None and not (isinstance(v, (list, tuple)) and len(v) == 0)}


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
