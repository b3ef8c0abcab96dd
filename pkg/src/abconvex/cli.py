"""Scenario runner: every module exposed as a subcommand with JSON reports.

Scenarios are JSON files validated against docs/schema.json; reports are JSON
with extended reals encoded as {"finite": v} | "+inf" | "-inf" so that
infinities round-trip losslessly.  Reports are byte-identical for a fixed
(scenario, seed) pair; wall-clock timing goes to stderr only.

Exit codes: 0 success, 2 invalid scenario, 3 negative mathematical outcome
where a positive one was demanded (e.g. certify found no certificate).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import ExtReal, FiniteMetricSpace, GridFn, build_metric_space
from .errors import AbconvexError, LevelAbovePrimal, NoWitness, ScenarioError
from .families import (
    DualGrid,
    ElemFamily,
    ElemParams,
    FamilyKind,
    Sampled1D,
    biconjugate,
    conjugate_transform,
    convexity_defect,
    default_dual_grid,
    peaking_witness,
    urysohn_witness,
)
from .lagrangian import (
    DualityReport,
    PerturbationProblem,
    duality_report,
    gap_certificate,
    lsc_defect,
)
from .constrained import ConstrainedInstance, ConstraintMap, verify_zero_gap_metric
from .transport import (
    ConicLP,
    TransportProblem,
    conic_lp_dual,
    kantorovich_gap_report,
    solve_transport,
)

def _schema_path(name: str) -> Path:
    repo = Path(__file__).resolve().parents[2] / "docs" / name
    if repo.exists():
        return repo
    return Path(__file__).resolve().parent / "schemas" / name


SCHEMA_PATH = _schema_path("schema.json")
REPORT_SCHEMA_PATH = _schema_path("report_schema.json")

EXIT_OK = 0
EXIT_BAD_SCENARIO = 2
EXIT_NEGATIVE = 3


# ---------------------------------------------------------------------------
# JSON <-> value helpers
# ---------------------------------------------------------------------------

def ext_to_json(x):
    v = x.as_float() if isinstance(x, ExtReal) else float(x)
    if v == np.inf:
        return "+inf"
    if v == -np.inf:
        return "-inf"
    return {"finite": v}

def ext_from_json(v) -> float:
    if isinstance(v, (int, float)):
        return float(v)
    if v == "+inf":
        return np.inf
    if v == "-inf":
        return -np.inf
    if isinstance(v, dict) and set(v) == {"finite"}:
        return float(v["finite"])
    raise ScenarioError(f"bad extended-real encoding: {v!r}")

def ext_list(values) -> list:
    return [ext_to_json(v) for v in values]

def params_to_json(p: ElemParams) -> dict:
    return {
        "a": p.a,
        "ell": None if p.ell is None else [float(v) for v in p.ell],
        "anchor": p.anchor,
        "c": p.c,
    }

def params_from_json(d: dict) -> ElemParams:
    return ElemParams(
        a=float(d.get("a", 0.0)),
        ell=d.get("ell"),
        anchor=d.get("anchor"),
        c=float(d.get("c", 0.0)),
    )


def parse_domain(spec: dict, validate: str) -> FiniteMetricSpace:
    pts = spec["points"]
    metric = spec.get("metric", "euclidean")
    if isinstance(metric, dict):
        metric = np.asarray(metric["custom"], dtype=float)
    return build_metric_space(pts, metric_kind=metric, validate=validate)


def parse_family(spec: dict, domain: FiniteMetricSpace) -> ElemFamily:
    kind = FamilyKind(spec["kind"])
    if kind == FamilyKind.SIGMA_NU:
        sigma = GridFn(domain, np.asarray(spec["sigma"], dtype=float))
        nu = GridFn(domain, np.asarray(spec["nu"], dtype=float))
        return ElemFamily.sigma_nu(domain, sigma, nu)
    if kind == FamilyKind.GENERALIZED_METRIC:
        shape = Sampled1D(np.asarray(spec["g_shape"]["ts"], dtype=float),
                          np.asarray(spec["g_shape"]["vs"], dtype=float))
        return ElemFamily.generalized_metric(domain, shape,
                                             float(spec["quasi_subadd_const"]))
    if kind == FamilyKind.GAUGE:
        return ElemFamily.gauge(domain, spec.get("norm", "l2"))
    return ElemFamily(kind, domain)


def parse_dual_grid(spec: dict, domain: FiniteMetricSpace, f=None) -> DualGrid:
    family = parse_family(spec, domain)
    if "params" in spec:
        params = tuple(params_from_json(d) for d in spec["params"])
        return DualGrid(family, params)
    auto = spec.get("auto", {})
    return default_dual_grid(
        family, f,
        slope_count=int(auto.get("slope_count", 9)),
        curvature_levels=int(auto.get("curvature_levels", 5)),
        max_anchors=auto.get("max_anchors"),
    )


def parse_ext_matrix(rows) -> np.ndarray:
    return np.asarray([[ext_from_json(v) for v in row] for row in rows], dtype=float)


def report_duality(rep: DualityReport) -> dict:
    out = {
        "primal": ext_to_json(rep.primal),
        "dual": ext_to_json(rep.dual),
        "gap": ext_to_json(rep.gap),
        "V": ext_list(rep.V.values),
        "V_star": ext_list(rep.V_star),
        "V_bidual_at_y0": ext_to_json(rep.V_bidual_at_y0),
        "anchor_gap": ext_to_json(rep.anchor_gap()),
        "reconstruction_ok": rep.reconstruction_ok,
        "convexity_scope": rep.convexity_scope,
        "convexity_holds": rep.convexity_holds,
        "certificate": report_certificate(rep.certificate),
        "multiplier_grid": {
            "kind": rep.psi_grid.family.kind.value,
            "size": rep.psi_grid.size,
        },
    }
    return out


def report_certificate(cert) -> dict | None:
    if cert is None:
        return None
    return {
        "psi1": params_to_json(cert.psi1),
        "psi2": params_to_json(cert.psi2),
        "phi1": {"kind": cert.phi1.kind, "level": cert.phi1.level},
        "phi2": {"kind": cert.phi2.kind, "level": cert.phi2.level},
        "t": {"t0": cert.t.t0, "level": cert.t.level,
              "value": cert.t.lower_envelope_value},
    }


def lsc_curve(rep: DualityReport) -> list[dict]:
    """Defect of the optimal value function per punctured-ball radius."""
    V, y0 = rep.V, rep.y0
    if not np.isfinite(V.values[y0]):
        return []
    radii = np.unique(V.domain.dist[y0])
    radii = radii[radii > 0]
    return [{"radius": float(r), "defect": lsc_defect(V, y0, float(r))}
            for r in radii]


# ---------------------------------------------------------------------------
# scenario runners (each returns (results_dict, curve_rows, exit_code))
# ---------------------------------------------------------------------------

def run_conjugate(sc: dict, rng, validate: str):
    domain = parse_domain(sc["domain"], validate)
    f = GridFn(domain, np.asarray([ext_from_json(v) for v in sc["function"]]))
    grid = parse_dual_grid(sc["family"], domain, f)
    star = conjugate_transform(f, grid)
    second = biconjugate(f, grid)
    defects = [
        convexity_defect(f, i, grid) if np.isfinite(f.values[i]) else None
        for i in range(f.size)
    ]
    results = {
        "conjugate": ext_list(star),
        "biconjugate": ext_list(second.values),
        "defect": defects,
        "grid_size": grid.size,
    }
    return results, None, EXIT_OK


def _canonical_instance(shape: str, n_points: int):
    ys = np.linspace(-1.0, 1.0, n_points)
    Y = build_metric_space(ys[:, None])
    y0 = int(np.flatnonzero(ys == 0.0)[0])
    if shape == "vee_down":
        p = np.vstack([ys, -ys])          # V(y) = -|y|
    else:
        p = np.abs(ys)[None, :]           # V(y) = |y|
    prob = PerturbationProblem(Y=Y, p=p, y0=y0)
    V = GridFn(Y, p.min(axis=0))
    grid = default_dual_grid(ElemFamily.affine(Y), V)
    return prob, grid


def run_gap(sc: dict, rng, validate: str):
    if "canonical" in sc:
        shape = sc["canonical"]["shape"]
        levels = [int(v) for v in sc["canonical"]["levels"]]
        base_r = 2.0 / (levels[0] - 1)
        rows = []
        for n_points in levels:
            prob, grid = _canonical_instance(shape, n_points)
            rep = duality_report(prob, grid)
            rows.append({
                "points": n_points,
                "spacing": 2.0 / (n_points - 1),
                "gap": rep.gap.as_float(),
                "lsc_defect": lsc_defect(rep.V, rep.y0, base_r),
            })
        results = {"refinement": rows, "shape": shape, "base_radius": base_r}
        return results, rows, EXIT_OK

    domain = parse_domain(sc["domain"], validate)
    p = parse_ext_matrix(sc["p"])
    prob = PerturbationProblem(Y=domain, p=p, y0=int(sc["y0"]))
    V = GridFn(domain, p.min(axis=0))
    grid = parse_dual_grid(sc["family"], domain, V)
    rep = duality_report(prob, grid, convexity_scope=sc.get("convexity_scope", "anchor"))
    results = report_duality(rep)
    curve = lsc_curve(rep)
    results["lsc_curve"] = curve
    return results, curve, EXIT_OK


def run_certify(sc: dict, rng, validate: str):
    domain = parse_domain(sc["domain"], validate)
    p = parse_ext_matrix(sc["p"])
    prob = PerturbationProblem(Y=domain, p=p, y0=int(sc["y0"]))
    V = GridFn(domain, p.min(axis=0))
    grid = parse_dual_grid(sc["family"], domain, V)
    cert = gap_certificate(prob, grid, float(sc["alpha"]))
    results = {
        "alpha": float(sc["alpha"]),
        "certificate": report_certificate(cert),
    }
    return results, None, (EXIT_OK if cert is not None else EXIT_NEGATIVE)


def run_constrained(sc: dict, rng, validate: str):
    domain = parse_domain(sc["domain"], validate)
    f = GridFn(len(sc["f"]), np.asarray([ext_from_json(v) for v in sc["f"]]))
    cmap = ConstraintMap(
        feasible=tuple(frozenset(s) for s in sc["A"]),
        n_x=f.size,
        allow_empty=bool(sc.get("allow_empty", False)),
    )
    inst = ConstrainedInstance(f=f, map=cmap, Y=domain, y0=int(sc["y0"]))
    ladder = tuple(float(a) for a in sc.get("ladder", [2.0 ** k for k in range(7)]))
    rep = verify_zero_gap_metric(inst, ladder, tol=float(sc.get("tol", 1e-9)))
    curve = [{"rung": a} for a in rep.ladder]
    results = {
        "duality": report_duality(rep.duality),
        "constrained_value": ext_to_json(rep.constrained_value),
        "ladder": list(rep.ladder),
        "minimal_rung": rep.minimal_rung,
        "proof_bound": rep.proof_bound,
        "anchor_feasible": rep.anchor_feasible,
        "hypothesis": rep.hypothesis,
    }
    return results, curve, EXIT_OK


def run_transport(sc: dict, rng, validate: str):
    if "cost_csv" in sc:
        cost = np.loadtxt(sc["cost_csv"], delimiter=",", ndmin=2)
    else:
        cost = np.asarray(sc["cost"], dtype=float)
    prob = TransportProblem(cost=cost, mu=sc["mu"], nu=sc["nu"])
    coupling, pots, value = solve_transport(prob)
    audit = kantorovich_gap_report(prob)
    results = {
        "value": value,
        "coupling": [[float(v) for v in row] for row in coupling.q],
        "potentials": {"psi": [float(v) for v in pots.psi],
                       "phi": [float(v) for v in pots.phi]},
        "primal": audit.primal,
        "dual": audit.dual,
        "gap": audit.gap,
        "slack_violations": audit.slack_violations,
        "orientation": audit.orientation,
    }
    return results, None, EXIT_OK


def run_conic(sc: dict, rng, validate: str):
    rep = conic_lp_dual(ConicLP(pi=sc["pi"], c_vec=sc["c"]))
    results = {
        "primal": ext_to_json(rep.primal),
        "dual": ext_to_json(rep.dual),
        "q_star": None if rep.q_star is None else [float(v) for v in rep.q_star],
    }
    return results, None, EXIT_OK


def run_peaking(sc: dict, rng, validate: str):
    domain = parse_domain(sc["domain"], validate)
    family = parse_family(sc["family"], domain)
    y0 = int(sc["y0"])
    results: dict = {}
    code = EXIT_OK
    if "g" in sc:
        try:
            w = peaking_witness(family, y0, float(sc["eps"]), float(sc["delta"]),
                                float(sc["K"]), params_from_json(sc["g"]))
            results["peaking_witness"] = params_to_json(w)
        except NoWitness as e:
            results["peaking_witness"] = None
            results["peaking_failure"] = str(e)
            code = EXIT_NEGATIVE
    if sc.get("urysohn"):
        try:
            w = urysohn_witness(family, y0, float(sc["eps"]), float(sc["delta"]))
            results["urysohn_witness"] = params_to_json(w)
        except NoWitness as e:
            results["urysohn_witness"] = None
            results["urysohn_failure"] = str(e)
            code = EXIT_NEGATIVE
    draws = int(sc.get("draws", 0))
    if draws:
        ok = 0
        drawn = []
        for _ in range(draws):
            eps = float(rng.uniform(0.05, 1.0))
            delta = float(rng.uniform(0.1, 1.5))
            K = float(rng.uniform(0.1, 5.0))
            anchor = int(rng.integers(domain.n))
            a = float(rng.uniform(0.5, 4.0))
            c = float(rng.uniform(-2.0, 2.0))
            g = ElemParams(a=a, anchor=anchor, c=c)
            try:
                peaking_witness(family, y0, eps, delta, K, g)
                ok += 1
                drawn.append({"eps": eps, "delta": delta, "K": K, "ok": True})
            except NoWitness:
                drawn.append({"eps": eps, "delta": delta, "K": K, "ok": False})
        results["draws"] = drawn
        results["draws_verified"] = ok
        if ok != draws:
            code = EXIT_NEGATIVE
    return results, None, code


RUNNERS = {
    "conjugate": run_conjugate,
    "gap": run_gap,
    "certify": run_certify,
    "constrained": run_constrained,
    "transport": run_transport,
    "conic": run_conic,
    "peaking": run_peaking,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def load_schema(path: Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def validate_scenario(scenario: dict) -> None:
    import jsonschema

    try:
        jsonschema.validate(scenario, load_schema(SCHEMA_PATH))
    except jsonschema.ValidationError as e:
        raise ScenarioError(f"scenario failed schema validation: {e.message}")


def run_scenario(path: str, out=None, seed=None, tol=None, validate="full",
                 csv_path=None) -> int:
    """Execute one scenario file and write its JSON report.  Returns the exit
    code; raises nothing scenario-related (errors map to exit codes)."""
    t0 = time.monotonic()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            scenario = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: cannot read scenario: {e}", file=sys.stderr)
        return EXIT_BAD_SCENARIO

    try:
        validate_scenario(scenario)
        kind = scenario["kind"]
        if tol is not None:
            scenario = {**scenario, "tol": tol}
        seed_val = seed if seed is not None else scenario.get("seed")
        if scenario.get("draws") or "random" in scenario:
            if seed_val is None:
                raise ScenarioError("randomized scenarios require a seed")
        rng = np.random.default_rng(seed_val)
        results, curve, code = RUNNERS[kind](scenario, rng, validate)
    except (ScenarioError, AbconvexError, LevelAbovePrimal, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_SCENARIO

    report = {
        "tool": {"name": "abconvex", "version": __version__},
        "kind": kind,
        "seed": seed_val,
        "scenario": scenario,
        "results": results,
        "exit_code": code,
    }
    payload = json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if out in (None, "-"):
        sys.stdout.write(payload)
    else:
        Path(out).write_text(payload, encoding="utf-8")

    if csv_path is not None:
        if not curve:
            print("error: this scenario produces no curve table", file=sys.stderr)
            return EXIT_BAD_SCENARIO
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(curve[0].keys()))
            writer.writeheader()
            writer.writerows(curve)

    print(f"elapsed_s={time.monotonic() - t0:.3f}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="abconvex",
        description="Finite-grid conjugate-duality scenario runner",
    )
    parser.add_argument("command", choices=sorted(RUNNERS))
    parser.add_argument("--scenario", required=True, help="path to a scenario JSON file")
    parser.add_argument("--out", default=None, help="report path (default stdout)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--validate", choices=["full", "fast"], default="full")
    parser.add_argument("--csv", dest="csv_path", default=None,
                        help="also write the scenario's curve table as CSV")
    args = parser.parse_args(argv)

    try:
        with open(args.scenario, "r", encoding="utf-8") as fh:
            kind = json.load(fh).get("kind")
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: cannot read scenario: {e}", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    if kind != args.command:
        print(f"error: scenario kind {kind!r} does not match command "
              f"{args.command!r}", file=sys.stderr)
        return EXIT_BAD_SCENARIO

    return run_scenario(args.scenario, out=args.out, seed=args.seed, tol=args.tol,
                        validate=args.validate, csv_path=args.csv_path)


if __name__ == "__main__":
    sys.exit(main())
