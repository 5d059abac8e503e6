"""Command-line verification suites with deterministic reports.

`qcheck <suite>` runs one named check over seeded sample points and
emits a machine-readable report.  Exit code 0 means every point passed
its tolerance, 1 records a tolerance or numerical failure, 2 a usage
error.  JSON output is byte-deterministic for a fixed config: floats
are serialized with 17 significant digits (exact round trip) and the
report carries no timing data (the text format does).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .connection import bianchi_residual
from .deform import (
    DeformationField,
    a_operator,
    diffeo_to_deformation,
    nonlinear_slope,
    random_tangent_field,
)
from .geometry import RetractionError, ScalarField, polynomial_one_form, \
    random_deformation_terms
from .qcstruct import (
    ContactTriple,
    Sp2Element,
    StructureError,
    canonical_triple,
    conformal_rescale,
    conformal_shift_defect,
    galicki_triple,
    integrability_residual,
    perturb_triple,
    validate_qc,
)
from .symbols import dimension_ledger, exactness_at, xi_design

SUITES = (
    "check-canonical",
    "check-galicki",
    "check-conformal",
    "perturb",
    "bianchi",
    "symbols",
    "deform-linearization",
)

# analytic-Jacobian path for the exact canonical forms; cubic Galicki
# coefficients and FD-assisted paths get looser defaults
DEFAULT_TOL = {
    "check-canonical": 1e-8,
    "check-galicki": 1e-6,
    "check-conformal": 1e-6,
    "perturb": 1e-4,
    "bianchi": 1e-3,
    "symbols": 1e-8,
    "deform-linearization": 1e-4,
}

DEFAULT_POINTS = {
    "check-canonical": 64,
    "check-galicki": 12,
    "check-conformal": 16,
    "perturb": 64,
    "bianchi": 4,
    "symbols": 200,
    "deform-linearization": 3,
}

DEFAULT_PERTURBATION = {
    "seed": 20240, "degree": 2, "terms_per_component": 3, "magnitude": 1e-2,
}


@dataclass
class RunConfig:
    """Resolved suite configuration (file values overridden by flags)."""

    suite: str
    seed: int = 7
    points: int | None = None
    fd_step: float = 1e-5
    tol: float | None = None
    d_params: list | None = None
    perturbation: dict = field(default_factory=lambda: dict(DEFAULT_PERTURBATION))

    def __post_init__(self):
        if self.suite not in SUITES:
            raise UsageError(f"unknown suite {self.suite!r}")
        if self.points is None:
            self.points = DEFAULT_POINTS[self.suite]
        if self.points < 1:
            raise UsageError("point count must be >= 1")
        if not (0.0 < self.fd_step <= 1e-2):
            raise UsageError("fd-step must lie in (0, 1e-2]")
        if self.tol is None:
            self.tol = DEFAULT_TOL[self.suite]
        if self.d_params is not None:
            if len(self.d_params) != 10:
                raise UsageError("--D needs exactly 10 reals")
            # validated further on construction (diagonal parts imaginary)
            Sp2Element.from_params(self.d_params)

    def as_dict(self) -> dict:
        return {
            "suite": self.suite, "seed": self.seed, "points": self.points,
            "fd_step": self.fd_step, "tol": self.tol,
            "D": self.d_params, "perturbation": self.perturbation,
        }


class UsageError(ValueError):
    pass


@dataclass
class Report:
    suite: str
    config: RunConfig
    points: list
    constants: dict
    wall_time: float = 0.0

    @property
    def aggregate(self) -> dict:
        residuals = [r.get("residual") for r in self.points
                     if r.get("residual") is not None]
        failures = sum(1 for r in self.points if not r.get("pass", False))
        return {
            "count": len(self.points),
            "max": max(residuals) if residuals else None,
            "mean": (sum(residuals) / len(residuals)) if residuals else None,
            "pass": failures == 0,
            "failures": failures,
        }

    @property
    def passed(self) -> bool:
        return self.aggregate["pass"]

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "config": self.config.as_dict(),
            "points": self.points,
            "aggregate": self.aggregate,
            "constants": self.constants,
            "provenance": {
                "package": "qcontact",
                "version": __version__,
                "numpy": np.__version__,
            },
        }


# ---------------------------------------------------------------------------
# canonical JSON (sorted keys, 17-significant-digit floats)
# ---------------------------------------------------------------------------


def _canonical_json(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not np.isfinite(value):
            return "null"
        return format(value, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _canonical_json(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_canonical_json(x) for x in obj) + "]"
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        return "{" + ",".join(
            f"{json.dumps(str(k))}:{_canonical_json(v)}" for k, v in items) + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def emit_report(report: Report, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (_canonical_json(report.as_dict()) + "\n").encode()
    if fmt != "text":
        raise UsageError(f"unknown format {fmt!r}")
    agg = report.aggregate
    lines = [
        f"suite: {report.suite}",
        f"points: {agg['count']}  failures: {agg['failures']}",
        f"max residual: {agg['max']}",
        f"mean residual: {agg['mean']}",
        f"tolerance: {report.config.tol}",
        f"result: {'PASS' if agg['pass'] else 'FAIL'}",
        f"wall time: {report.wall_time:.3f}s",
    ]
    for rec in report.points:
        status = "ok" if rec.get("pass") else "FAIL"
        res = rec.get("residual")
        extra = f"  residual={res:.3e}" if isinstance(res, float) else ""
        err = f"  error={rec['error']}" if "error" in rec else ""
        lines.append(f"  [{rec.get('index', '?')}] {status}{extra}{err}")
    return ("\n".join(lines) + "\n").encode()


# ---------------------------------------------------------------------------
# suite implementations
# ---------------------------------------------------------------------------


def _point_loop(ct: ContactTriple, pts, worker) -> list:
    records = []
    for idx, p in enumerate(pts):
        rec = {"index": idx, "point": [float(v) for v in p]}
        try:
            rec.update(worker(p))
        except (StructureError, RetractionError, np.linalg.LinAlgError) as exc:
            rec["error"] = str(exc)
            rec["pass"] = False
        records.append(rec)
    return records


def _residual_record(ct, p, tol):
    rep = validate_qc(ct, p)
    res = integrability_residual(ct, p)
    return {
        "residual": res.normalized,
        "residual_raw": res.raw,
        "torsion_norm": res.torsion_norm,
        "gram_eigenvalues": [float(v) for v in rep.eigenvalues],
        "is_qc": bool(rep.is_qc),
        "consistency_defect": rep.consistency_defect,
        "pass": bool(rep.is_qc and res.normalized < tol),
    }


def _suite_canonical(cfg: RunConfig) -> list:
    ct = canonical_triple()
    pts = ct.surface.sample_points(cfg.points, cfg.seed)
    return _point_loop(ct, pts, lambda p: _residual_record(ct, p, cfg.tol))


def _suite_galicki(cfg: RunConfig) -> list:
    if cfg.d_params is not None:
        d = Sp2Element.from_params(cfg.d_params)
    else:
        d = Sp2Element.random(np.random.default_rng(cfg.seed), norm=0.1)
    ct = galicki_triple(d)
    pts = ct.surface.sample_points(cfg.points, cfg.seed)
    return _point_loop(ct, pts, lambda p: _residual_record(ct, p, cfg.tol))


def _conformal_factors() -> list[ScalarField]:
    e0, e3, e5 = np.eye(8)[0], np.eye(8)[3], np.eye(8)[5]
    return [
        ScalarField(lambda x: 1.0 + 0.1 * x[0],
                    lambda x: 0.1 * e0, name="affine"),
        ScalarField(lambda x: float(np.exp(0.05 * x[3])),
                    lambda x: 0.05 * np.exp(0.05 * x[3]) * e3, name="exp"),
        ScalarField(lambda x: 1.0 + 0.05 * x[5] ** 2,
                    lambda x: 0.1 * x[5] * e5, name="quadratic"),
    ]


def _suite_conformal(cfg: RunConfig) -> list:
    ct = canonical_triple()
    pts = ct.surface.sample_points(cfg.points, cfg.seed)
    factors = _conformal_factors()
    shift_tol = 1e-5

    def worker(p):
        rec = {"rescaled": []}
        worst = 0.0
        ok = True
        for f in factors:
            rescaled = conformal_rescale(ct, f)
            res = integrability_residual(rescaled, p)
            shift = conformal_shift_defect(ct, f, p)
            worst = max(worst, res.normalized)
            ok = ok and res.normalized < cfg.tol and shift < shift_tol
            rec["rescaled"].append({
                "factor": f.name, "residual": res.normalized,
                "shift_defect": shift,
            })
        rec["residual"] = worst
        rec["pass"] = ok
        return rec

    return _point_loop(ct, pts, worker)


def perturbation_forms(spec: dict):
    """Deformation forms from a perturbation spec (tables or seeded)."""
    magnitude = float(spec.get("magnitude", 1e-2))
    if "tables" in spec:
        tables = spec["tables"]
    else:
        tables = random_deformation_terms(
            int(spec.get("seed", DEFAULT_PERTURBATION["seed"])),
            degree=int(spec.get("degree", 2)),
            terms_per_component=int(spec.get("terms_per_component", 3)),
        )
    return [polynomial_one_form(t) for t in tables], magnitude


def perturbed_canonical(spec: dict) -> ContactTriple:
    forms, magnitude = perturbation_forms(spec)
    theta = DeformationField(forms, name="perturbation")
    return perturb_triple(canonical_triple(), theta.forms, magnitude)


def _suite_perturb(cfg: RunConfig) -> list:
    ct = perturbed_canonical(cfg.perturbation)
    pts = ct.surface.sample_points(cfg.points, cfg.seed)

    def worker(p):
        res = integrability_residual(ct, p)
        return {
            "residual": res.normalized,
            "residual_raw": res.raw,
            "torsion_norm": res.torsion_norm,
            # detection suite: a point passes when the perturbation is seen
            "pass": bool(res.normalized > cfg.tol),
        }

    records = _point_loop(ct, pts, worker)
    return records


def _suite_bianchi(cfg: RunConfig) -> list:
    ct = perturbed_canonical(cfg.perturbation)
    pts = ct.surface.sample_points(cfg.points, cfg.seed)

    def worker(p):
        rep = bianchi_residual(ct, p, step=cfg.fd_step * 10)
        rep2 = bianchi_residual(ct, p, step=cfg.fd_step * 20)
        ratio = rep2.residual / rep.residual if rep.residual > 0 else 0.0
        converges = rep2.residual < 1e-8 or ratio < 5.0
        return {
            "residual": rep.residual,
            "residual_doubled_step": rep2.residual,
            "richardson_ratio": ratio,
            "torsion_norm": rep.torsion_norm,
            "pass": bool(rep.residual < cfg.tol and converges),
        }

    return _point_loop(ct, pts, worker)


def _suite_symbols(cfg: RunConfig) -> list:
    records = []
    for idx, xi in enumerate(xi_design(cfg.points, seed=cfg.seed)):
        rep = exactness_at(xi)
        gap = max(rep.gap_da, rep.gap_ab)
        records.append({
            "index": idx,
            "xi": [float(v) for v in xi],
            "ranks": [rep.rank_d, rep.rank_a, rep.rank_b],
            "residual": gap,
            "pass": bool((rep.rank_d, rep.rank_a, rep.rank_b) == (3, 5, 7)
                         and gap < cfg.tol),
        })
    return records


def _suite_deform(cfg: RunConfig) -> list:
    ct = canonical_triple()
    pts = ct.surface.sample_points(cfg.points, cfg.seed)
    records = []

    # gauge invariance over polynomial diffeomorphism fields
    for k in range(20):
        theta = diffeo_to_deformation(random_tangent_field(cfg.seed + k))
        worst = max(a_operator(theta, p).norm for p in pts[:2])
        records.append({
            "index": len(records), "kind": "gauge", "field_seed": cfg.seed + k,
            "residual": worst, "pass": bool(worst < cfg.tol),
        })

    # linearization slope against the nonlinear residual
    forms_tables = [random_deformation_terms(cfg.seed + 100 + k,
                                             terms_per_component=2)
                    for k in range(5)]
    for k, tables in enumerate(forms_tables):
        theta = DeformationField([polynomial_one_form(t) for t in tables])
        p = pts[k % len(pts)]
        lin = a_operator(theta, p).norm
        rel = 0.0
        ok = True
        for t in (1e-3, 5e-4):
            slope = nonlinear_slope(theta, p, t)
            rel = max(rel, abs(slope - lin) / lin if lin > 0 else 0.0)
        ok = rel < 0.05
        records.append({
            "index": len(records), "kind": "slope", "direction_seed": cfg.seed + 100 + k,
            "a_norm": lin, "residual": rel, "pass": bool(ok),
        })
    return records


_SUITE_FUNCS = {
    "check-canonical": _suite_canonical,
    "check-galicki": _suite_galicki,
    "check-conformal": _suite_conformal,
    "perturb": _suite_perturb,
    "bianchi": _suite_bianchi,
    "symbols": _suite_symbols,
    "deform-linearization": _suite_deform,
}


def run_suite(cfg: RunConfig) -> Report:
    start = time.perf_counter()
    points = _SUITE_FUNCS[cfg.suite](cfg)
    report = Report(
        suite=cfg.suite,
        config=cfg,
        points=points,
        constants=dimension_ledger().as_dict(),
        wall_time=time.perf_counter() - start,
    )
    if cfg.suite == "perturb":
        # detection criterion: most points must see the perturbation
        frac = (sum(1 for r in points if r.get("pass")) / len(points)) if points else 0.0
        for rec in points:
            rec["detection_fraction"] = frac
        if frac >= 0.8:
            for rec in points:
                rec["pass"] = True
    return report


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcheck",
        description="verification suites for quaternionic contact structures",
    )
    parser.add_argument("suite", choices=SUITES)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--points", type=int)
    parser.add_argument("--fd-step", type=float, dest="fd_step")
    parser.add_argument("--tol", type=float)
    parser.add_argument("--D", type=float, nargs=10, dest="d_params",
                        metavar="d")
    parser.add_argument("--format", choices=("json", "text"), default="json")
    parser.add_argument("--out", help="write the report to this file")
    return parser


def config_from_args(args) -> RunConfig:
    base: dict = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
    merged = {
        "suite": args.suite,
        "seed": base.get("seed", 7),
        "points": base.get("points"),
        "fd_step": base.get("fd_step", 1e-5),
        "tol": base.get("tol"),
        "d_params": base.get("D"),
        "perturbation": base.get("perturbation", dict(DEFAULT_PERTURBATION)),
    }
    for key in ("seed", "points", "fd_step", "tol", "d_params"):
        val = getattr(args, key if key != "d_params" else "d_params", None)
        if val is not None:
            merged[key] = val
    return RunConfig(**merged)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = config_from_args(args)
    except (UsageError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"qcheck: {exc}", file=sys.stderr)
        return 2
    report = run_suite(cfg)
    payload = emit_report(report, args.format)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(payload)
    else:
        sys.stdout.buffer.write(payload)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
