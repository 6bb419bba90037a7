"""Command line front end.

    python3 -m orbitcount --spec run.cfg --stage compare --out out/

The config file is INI-style key=value with sections [spec], [run] and
[constants]; flags override [run] values.  Exit status: 0 on success,
1 on bad input, 2 when the mathematics or the resource budget stops a
stage (unsupported structure, non-convergence, grids that are too large).
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field

from . import asym, pipeline, spectra
from .curves import CountingCurve, fit, log_lambdas
from .errors import (DimensionMismatch, NegativeExponent, OrbitCountError, PolySyntaxError,
                     VariableOutOfRange)
from .liealg import SchrodingerSpec, discreteness
from .poly import parse, to_text
from .scaling import classify

STAGES = ("algebra", "discreteness", "chart", "scaling", "classify", "conjecture", "direct",
          "compare", "constants")

DEFAULT_LAMBDAS = {"classify": "1e2:1e6:9", "scaling": "1e3:1e6:7"}
FALLBACK_LAMBDAS = "20:80:7"

INPUT_ERRORS = (PolySyntaxError, VariableOutOfRange, NegativeExponent, DimensionMismatch)


@dataclass
class RunConfig:
    n: int
    a: tuple
    V: str
    stage: str
    lambdas: list
    grid: tuple | None = None
    box: tuple | None = None
    samples: int = 20000
    seed: int = 0
    tol: float = 1e-2
    ctrunc: float | None = None     # None: 16 for a box, 8 for a mask
    min_decades: float = 1.5
    domain: str = "auto"
    out: str = "out"
    constants: dict = field(default_factory=dict)

    def canonical(self):
        d = dict(self.__dict__)
        d.pop("out")
        return json.dumps(d, sort_keys=True, default=str)

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def spec(self):
        return SchrodingerSpec.from_strings(self.n, list(self.a), self.V)


def parse_lambdas(text):
    parts = text.split(":")
    if len(parts) == 3:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
        if not (0 < lo < hi) or steps < 1:
            raise ValueError(f"bad lambda range {text!r}")
        return log_lambdas(lo, hi, steps) if steps > 1 else [lo]
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return tuple(int(x) for x in text.split(",")) if text else None


def _floats(text):
    return tuple(float(x) for x in text.split(",")) if text else None


def load_config(args):
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    if args.spec:
        if not os.path.exists(args.spec):
            raise ValueError(f"config file {args.spec} not found")
        cp.read(args.spec)
    sp = cp["spec"] if cp.has_section("spec") else {}
    run = dict(cp["run"]) if cp.has_section("run") else {}
    for key in ("stage", "lambdas", "grid", "samples", "seed", "tol", "out", "box", "ctrunc",
                "min_decades", "domain"):
        v = getattr(args, key, None)
        if v is not None:
            run[key] = str(v)
    n = int(args.n or sp.get("n", 2))
    b = args.b or sp.get("b")
    a_text = args.a or sp.get("a")
    V = args.V or sp.get("V", "0")
    if b and a_text:
        raise ValueError("give either b (2D field) or a, not both")
    if b:
        if n != 2:
            raise ValueError("b= is a 2D shortcut")
        a = tuple(to_text(p) for p in SchrodingerSpec.from_field_2d(b, V).a)
    elif a_text:
        a = tuple(s.strip() for s in a_text.split(","))
        if len(a) != n:
            raise ValueError(f"a needs {n} components")
    else:
        a = tuple("0" for _ in range(n))
    stage = run.get("stage", "compare")
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}")
    lam_text = run.get("lambdas") or DEFAULT_LAMBDAS.get(stage, FALLBACK_LAMBDAS)
    consts = dict(cp["constants"]) if cp.has_section("constants") else {}
    for kv in args.set or []:
        k, _, v = kv.partition("=")
        consts[k.strip()] = v.strip()
    cfg = RunConfig(n=n, a=a, V=V, stage=stage, lambdas=parse_lambdas(lam_text),
                    grid=_ints(run.get("grid")), box=_floats(run.get("box")),
                    samples=int(run.get("samples", 20000)), seed=int(run.get("seed", 0)),
                    tol=float(run.get("tol", 1e-2)),
                    ctrunc=float(run["ctrunc"]) if run.get("ctrunc") else None,
                    min_decades=float(run.get("min_decades", 1.5)),
                    domain=run.get("domain", "auto"),
                    out=run.get("out", "out"), constants=consts)
    if cfg.samples < 100 or cfg.tol <= 0 or (cfg.ctrunc is not None and cfg.ctrunc <= 0):
        raise ValueError("samples >= 100, tol > 0 and ctrunc > 0 required")
    if cfg.domain not in ("auto", "box", "mask"):
        raise ValueError(f"domain must be auto, box or mask, not {cfg.domain!r}")
    if cfg.grid is not None and len(cfg.grid) != n:
        raise ValueError(f"grid needs {n} sizes")
    # parse the expressions now so syntax errors surface before any work
    cfg.spec()
    return cfg


class Writer:
    def __init__(self, cfg):
        self.cfg = cfg
        self.dir = cfg.out
        os.makedirs(self.dir, exist_ok=True)
        self.files = []

    def json(self, name, payload):
        payload = dict(payload)
        payload["config_hash"] = self.cfg.digest()
        path = os.path.join(self.dir, name)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True, default=_jsonable)
            fh.write("\n")
        self.files.append(path)

    def csv(self, name, curve: CountingCurve):
        path = os.path.join(self.dir, name)
        with open(path, "w") as fh:
            fh.write(f"# config_hash={self.cfg.digest()}\n")
            fh.write(curve.to_csv())
        self.files.append(path)


def _jsonable(o):
    try:
        import numpy as np
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
    except ImportError:
        pass
    return str(o)


def _direct_curve(cfg, spec):
    curve = CountingCurve(metadata={"method": "direct"})
    for lam in cfg.lambdas:
        if spec.n == 1:
            c = spectra.count_1d(spec.V, lam)
            curve.add(lam, c, "sturm")
            continue
        magnetic = any(not a.is_zero() for a in spec.a)
        mask = cfg.domain == "mask" or (cfg.domain == "auto" and magnetic and cfg.grid is None and cfg.box is None)
        if mask:
            res = spectra.count_masked(spec, lam, cfg.ctrunc or 8.0, info=True)
            curve.add(lam, res.count, res.method, 0.0, ";".join(res.flags))
            continue
        ctrunc = cfg.ctrunc or 16.0
        grid = None
        if cfg.grid is not None:
            box = cfg.box or spectra.truncation_box(spec, lam, ctrunc)
            grid = spectra.GridND(tuple(box), tuple(cfg.grid))
        res = spectra.count_nd_direct(spec, lam, grid, ctrunc=ctrunc, box=cfg.box, info=True)
        curve.add(lam, res.count, res.method, 0.0, ";".join(res.flags))
    return curve


def run_stage(cfg, out):
    spec = cfg.spec()
    st = cfg.stage
    base = {"stage": st, "spec": spec.describe(), "config": json.loads(cfg.canonical())}
    if st == "discreteness":
        out.json("discreteness.json", {**base, "discrete": discreteness(spec)})
        return
    if st == "algebra":
        state = pipeline.run(spec, upto="chart")
        g = state.algebra
        out.json("algebra.json", {**base, "algebra": json.loads(g.to_json()),
                                  "jacobi_defects": len(g.jacobi_defects()),
                                  "lower_central_series": [len(s) for s in g.lower_central_series()]})
        return
    if st == "chart":
        state = pipeline.run(spec, upto="chart")
        ch = state.chart
        out.json("chart.json", {**base, "coords": [to_text(c) for c in ch.coords],
                                "coexp": list(ch.coexp), "n_prime": ch.n_prime,
                                "normalization": ch.normalization})
        return
    if st == "scaling":
        state = pipeline.run(spec, samples=cfg.samples, seed=cfg.seed, upto="family")
        out.json("scaling.json", {**base, "limit": json.loads(state.limit.to_json()),
                                  "family": json.loads(state.family.to_json())})
        return
    if st == "classify":
        rep = _classify(cfg, spec)
        out.csv("classify_G1.csv", rep.G1_curve)
        out.csv("classify_G2.csv", rep.G2_curve)
        out.json("classify.json", {**base, "report": json.loads(rep.to_json())})
        return
    if st == "constants":
        out.json("constants.json", {**base, "constants": _constants(cfg)})
        return
    if st == "direct":
        curve = _direct_curve(cfg, spec)
        out.csv("direct.csv", curve)
        payload = {**base, "counts": [[p.lam, p.value] for p in curve.points]}
        try:
            f = fit(curve, min_points=min(6, len(curve)), min_decades=cfg.min_decades)
            payload["fit"] = json.loads(f.to_json())
        except OrbitCountError as e:
            payload["fit"] = {"skipped": str(e)}
        out.json("direct.json", payload)
        return
    # conjecture / compare
    state = pipeline.run(spec, samples=cfg.samples, seed=cfg.seed)
    report = _classify(cfg, spec, DEFAULT_LAMBDAS["classify"]) if state.limit.beta == 1 else None
    pred = asym.conjecture_rhs(spec, state.family, state.limit, report, cfg.lambdas, tol=cfg.tol)
    out.csv("conjecture.csv", pred.rhs_curve)
    try:
        pfit = json.loads(fit(pred.rhs_curve, force_b=pred.beta, min_points=min(6, len(pred.rhs_curve)),
                              min_decades=0).to_json())
    except OrbitCountError as e:
        pfit = {"skipped": str(e)}
    payload = {**base, "family": state.family.kind, "prediction": json.loads(pred.to_json()),
               "predicted_fit": pfit}
    if st == "conjecture":
        out.json("conjecture.json", payload)
        return
    try:
        direct = _direct_curve(cfg, spec)
    except OrbitCountError as e:
        payload["direct"] = {"unavailable": str(e), "code": e.code}
        payload["verdict"] = "Inconclusive"
        out.json("compare.json", payload)
        raise
    out.csv("direct.csv", direct)
    rep = asym.compare(direct, pred, min_decades=min(cfg.min_decades, 0.5))
    payload["compare"] = json.loads(rep.to_json())
    payload["verdict"] = rep.verdict
    out.json("compare.json", payload)
    print(rep.table())


def _classify(cfg, spec, lam_text=None):
    lams = parse_lambdas(lam_text) if lam_text else cfg.lambdas
    return classify(spec, lams, samples=cfg.samples, seed=cfg.seed, min_decades=cfg.min_decades)


def _constants(cfg):
    c = cfg.constants
    res = {}
    k = int(c["k"]) if c.get("k") else None
    l = int(c["l"]) if c.get("l") else None
    p = int(c["p"]) if c.get("p") else None
    which = [w.strip() for w in c.get("which", "").split(",") if w.strip()]
    if k is not None:
        res["series_constant"] = {"k": k, "value": asym.series_constant(k)}
    if k is not None and l is not None and k > l:
        est = asym.kappa_strong(k, l, max(cfg.tol, 1e-3), info=True)
        res["kappa_strong"] = {"k": k, "l": l, "value": est.value, "error": est.error}
    if k is not None and l is not None and p is not None:
        res["kappa1_3d"] = {"k": k, "l": l, "p": p, "value": asym.kappa1_3d(k, l, p)}
    if "kappa_inhomog" in which:
        est = asym.kappa_inhomog(max(cfg.tol, 1e-3), info=True)
        res["kappa_inhomog"] = {"value": est.value, "error": est.error}
    if not res:
        raise ValueError("constants stage needs k (and optionally l, p) or which=kappa_inhomog")
    return res


def build_parser():
    ap = argparse.ArgumentParser(prog="orbitcount", description=__doc__.split("\n")[0])
    ap.add_argument("--spec", help="config file with [spec]/[run]/[constants] sections")
    ap.add_argument("--stage", choices=STAGES)
    ap.add_argument("--lambdas", help="lo:hi:steps (log spaced) or a comma list")
    ap.add_argument("--grid", help="m1,m2[,m3] interior points per axis")
    ap.add_argument("--box", help="L1,L2[,L3] half-widths for direct counts")
    ap.add_argument("--samples", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--ctrunc", type=float, help="truncation level C in Psi*^2 <= C lam")
    ap.add_argument("--domain", choices=("auto", "box", "mask"),
                    help="direct counts on a box grid or on the lattice of the Psi* mask "
                         "(auto: mask for magnetic specs without --grid/--box)")
    ap.add_argument("--min-decades", dest="min_decades", type=float)
    ap.add_argument("--out")
    ap.add_argument("--n", type=int, help="dimension (inline spec)")
    ap.add_argument("--a", help="comma separated potential components (inline spec)")
    ap.add_argument("--b", help="2D magnetic field b12 (inline spec)")
    ap.add_argument("--V", help="electric potential (inline spec)")
    ap.add_argument("--set", action="append", help="constants key=value, e.g. --set k=1")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ValueError, KeyError, configparser.Error) + INPUT_ERRORS as e:
        print(json.dumps({"error": getattr(e, "code", "input"), "message": str(e)}), file=sys.stderr)
        return 1
    out = Writer(cfg)
    try:
        run_stage(cfg, out)
    except INPUT_ERRORS as e:
        print(json.dumps({"error": e.code, "message": str(e)}), file=sys.stderr)
        return 1
    except OrbitCountError as e:
        out.json("error.json", {"stage": cfg.stage, "error": e.code, "message": str(e)})
        print(json.dumps({"error": e.code, "message": str(e)}), file=sys.stderr)
        return 2
    except ValueError as e:
        print(json.dumps({"error": "input", "message": str(e)}), file=sys.stderr)
        return 1
    for f in out.files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
