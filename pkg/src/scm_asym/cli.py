"""Command-line front end: ``scm-asym describe|validate|predict``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import clustering, descriptors, montecarlo
from .errors import DomainError, NumericError, ScmAsymError
from .model import ensemble_from_dict, load_scenario, validate_ensemble

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERIC = 0, 2, 3
MIN_TRIALS_FOR_KS = 100

log = logging.getLogger("scm_asym")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scm-asym", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, type=Path, help="scenario JSON file")
    common.add_argument("--kind", default="eu", choices=["eu", "kl", "ss"], help="distance (default eu)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, default=0, help="base seed for every random draw")
    common.add_argument("--nodes", type=int, default=None, help="quadrature nodes for cross-covariances")
    common.add_argument("-M", "--dimension", type=int, default=None, help="override the scenario's M")
    common.add_argument("-v", "--verbose", action="store_true")

    d = sub.add_parser("describe", parents=[common], help="deterministic equivalents, means and covariances")
    d.add_argument("--format", choices=["json", "csv"], default="json")

    v = sub.add_parser("validate", parents=[common], help="Monte Carlo QQ points and KS statistics")
    v.add_argument("--trials", type=int, default=10_000, help="Monte Carlo trials")
    v.add_argument("--kinds", default=None, help="comma list; default: every kind the regime permits")

    r = sub.add_parser("predict", parents=[common], help="clustering probability over an M or delta-rho sweep")
    r.add_argument("--trials", type=int, default=clustering.DEFAULT_TRIALS,
                   help="data trials for the empirical probability; 0 skips them")
    r.add_argument("--samples", type=int, default=clustering.DEFAULT_GAUSSIAN_SAMPLES,
                   help="Gaussian draws for the theoretical probability")
    r.add_argument("--sweep-m", type=_int_list, default=None, help="comma list of M values")
    r.add_argument("--sweep-drho", type=_float_list, default=None,
                   help="values of |rho_1 - rho_3|; members listed in the scenario's 'sweep' block move")
    return p


def _pairs_of(ensemble):
    labels = [m.label for m in ensemble.members]
    return [(a, b) for i, a in enumerate(labels) for b in labels[i + 1:]]


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_describe(args, spec: dict) -> dict:
    ens = ensemble_from_dict(spec, args.dimension)
    law = descriptors.gaussian_law(ens, _pairs_of(ens), args.kind, nodes=args.nodes)
    d = law.descriptors
    args.out.mkdir(parents=True, exist_ok=True)
    rows = [[p[0], p[1], _fmt(d.dbar[k]), _fmt(d.mean2[k]), _fmt(d.cov[k, k])] for k, p in enumerate(d.pairs)]
    header = ["pair_i", "pair_j", "dbar", "mean2", "var"]
    summary = {"command": "describe", "kind": args.kind, "M": ens.M, "varsigma": ens.varsigma,
               "pairs": [{"pair": list(p), "dbar": float(d.dbar[k]), "mean2": float(d.mean2[k]),
                          "var": float(d.cov[k, k])} for k, p in enumerate(d.pairs)],
               "cov": d.cov.tolist(), "floored": law.floored}
    if args.format == "csv":
        _write_csv(args.out / "descriptors.csv", header, rows)
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    else:
        (args.out / "descriptors.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
        print(json.dumps(summary, indent=2))
    return summary


def _kinds_for(ens, requested):
    if requested:
        return [k.strip() for k in requested.split(",") if k.strip()]
    kinds = ["eu", "kl"]
    if all(m.N < m.M for m in ens.members):
        kinds.append("ss")
    return kinds


def cmd_validate(args, spec: dict) -> dict:
    ens = ensemble_from_dict(spec, args.dimension)
    pairs = _pairs_of(ens)
    kinds = _kinds_for(ens, args.kinds)
    args.out.mkdir(parents=True, exist_ok=True)
    report = {"command": "validate", "M": ens.M, "trials": args.trials, "seed": args.seed, "metrics": []}
    if args.trials < MIN_TRIALS_FOR_KS:
        report["warning"] = f"only {args.trials} trials; KS and QQ are unreliable below {MIN_TRIALS_FOR_KS}"
    stats = montecarlo.run_trials_multi(ens, pairs, kinds, args.trials, args.seed)
    crit = float(montecarlo.ks_critical(max(args.trials, 1)))
    for kind in kinds:
        law = descriptors.gaussian_law(ens, pairs, kind, nodes=args.nodes)
        st = stats[kind]
        st.to_csv(args.out / f"trials_{kind}.csv")
        for k, p in enumerate(pairs):
            entry = {"kind": kind, "pair": list(p)}
            x = st.distances[:, k]
            scalar = montecarlo.ScalarLaw(float(law.mean[k]), float(np.sqrt(law.covariance[k, k])))
            if x.size >= 10:
                qq = montecarlo.qq_points(x, scalar)
                name = f"qq_{kind}_{p[0]}-{p[1]}.csv"
                _write_csv(args.out / name, ["theoretical", "empirical"],
                           [[_fmt(a), _fmt(b)] for a, b in qq])
                ks = montecarlo.ks_statistic(x, scalar)
                entry.update({"qq_csv": name, "ks": ks, "critical_1pct": float(crit), "pass": bool(ks < crit)})
            else:
                entry.update({"ks": None, "pass": None})
            report["metrics"].append(entry)
    (args.out / "validate.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(json.dumps(report, indent=2))
    return report


def _sweep_specs(args, spec: dict):
    """Yield ``(x, scenario dict, M)`` for the requested sweep."""
    if args.sweep_drho is not None:
        block = spec.get("sweep")
        if not block:
            raise DomainError("scenario has no 'sweep' block for a delta-rho sweep")
        base = float(block["rho_base"])
        for dr in args.sweep_drho:
            s = json.loads(json.dumps(spec))
            for m in s["members"]:
                if m["label"] in block["moving"]:
                    m["rho"] = base + dr
            yield dr, s, args.dimension
        return
    for M in (args.sweep_m or [args.dimension or int(spec["M"])]):
        yield M, spec, M


def cmd_predict(args, spec: dict) -> dict:
    args.out.mkdir(parents=True, exist_ok=True)
    xname = "delta_rho" if args.sweep_drho is not None else "M"
    rows, out = [], []
    for x, s, M in _sweep_specs(args, spec):
        ens = ensemble_from_dict(s, M)
        scen = clustering.ClusterScenario.from_ensemble(ens)
        law = descriptors.gaussian_law(ens, scen.pairs, args.kind, nodes=args.nodes)
        theo = clustering.theoretical_probability(law, scen, args.samples, args.seed)
        emp = None
        if args.trials > 0:
            st = montecarlo.run_trials(ens, scen.pairs, args.kind, args.trials, args.seed)
            emp = clustering.empirical_probability(st, scen)
        rec = {xname: x, "M": ens.M, "theoretical": theo.to_dict(scen, args.kind, ens.M),
               "empirical": emp.to_dict(scen, args.kind, ens.M) if emp else None}
        out.append(rec)
        rows.append([x, _fmt(emp.probability) if emp else "", _fmt(emp.se) if emp else "",
                     _fmt(theo.probability), _fmt(theo.se)])
        log.info("%s=%s theoretical=%.4f", xname, x, theo.probability)
    _write_csv(args.out / f"predict_{args.kind}.csv",
               [xname, "empirical", "empirical_se", "theoretical", "theoretical_se"], rows)
    summary = {"command": "predict", "kind": args.kind, "rows": out}
    (args.out / f"predict_{args.kind}.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow([xname, "empirical", "theoretical"])
    for r in rows:
        w.writerow([r[0], r[1], r[3]])
    return summary


COMMANDS = {"describe": cmd_describe, "validate": cmd_validate, "predict": cmd_predict}


def _diagnostic(code: int, exc: BaseException) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    residual = getattr(exc, "residual", None)
    if residual is not None:
        payload["residual"] = float(residual)
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        spec = load_scenario(args.scenario)
        ens = ensemble_from_dict(spec, args.dimension)
        problems = validate_ensemble(ens)
        if problems:
            raise DomainError("; ".join(problems))
        if args.kind == "ss" and args.command != "validate":
            bad = [m.label for m in ens.members if m.N >= m.M]
            if bad:
                raise DomainError(f"subspace distance needs N < M; oversampled members: {bad}")
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.command](args, spec)
    except (DomainError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        return _diagnostic(EXIT_DOMAIN, exc)
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return _diagnostic(EXIT_NUMERIC, exc)
    except ScmAsymError as exc:
        return _diagnostic(EXIT_DOMAIN, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
