"""Command line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 data-integrity
error (stale constants cache, scores not covering the test set).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fio
from .core import METHODS, METRICS, DataError, Dataset, Density, IntegrityError, MethodConfig, ScoreVector, validate_dataset
from .metrics import evaluate
from .scoring import make_scorer, score_dataset, section_indices
from .synth import SynthConfig, generate, sweep


class UsageError(Exception):
    pass


def _run_manifest(out, args, config, inputs, seed=None):
    path = Path(str(out) + ".run.json") if not Path(out).is_dir() else Path(out) / "run.json"
    fio.write_run_manifest(path, args.command, config, inputs, seed, __version__)


def _load(args) -> Dataset:
    if args.test is None:
        ds = fio.load_dataset(args.refs, args.manifest)
    else:
        refs, test = fio.read_embeddings(args.refs), fio.read_embeddings(args.test)
        if refs.shape[1] != test.shape[1]:
            raise DataError("reference and test embeddings differ in dimension")
        metas = fio.read_manifest(args.manifest)
        if len(metas) != refs.shape[0] + test.shape[0]:
            raise DataError(f"manifest has {len(metas)} records for {refs.shape[0] + test.shape[0]} rows")
        ds = Dataset(np.vstack([refs, test]), metas)
    problems = validate_dataset(ds)
    if problems:
        raise DataError("invalid dataset:\n  " + "\n  ".join(problems[:20]))
    return ds


def _inputs(args, *names):
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def _density(args) -> Density:
    return Density.knn(args.k) if args.density == "knn" else Density.gwrp(args.r)


def cmd_synth(args):
    cfg_dict = {}
    if args.config:
        cfg_dict = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    try:
        cfg = SynthConfig.from_dict(cfg_dict)
    except (TypeError, ValueError) as e:
        raise UsageError(f"invalid synth config: {e}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = generate(cfg)
    fio.save_dataset(ds, out / "embeddings.npy", out / "manifest.json")
    _run_manifest(out, args, cfg.to_dict(), _inputs(args, "config"), cfg.seed)
    print(f"wrote {ds.n} x {ds.d} embeddings in {cfg.sections} sections to {out}")


def cmd_precompute(args):
    ds = _load(args)
    density = _density(args)
    constants, ids = {}, {}
    for sec, idx in section_indices(ds, args.metric).items():
        n = idx.n
        if density.kind == "knn" and density.k > n - 1:
            raise UsageError(f"section {sec!r}: K={density.k} needs more than {density.k} references, got {n}")
        constants[sec] = idx.constants_for(density)
        ids[sec] = tuple(ds.metas[i].id for i in ds.rows(section=sec, split="train"))
    fio.write_constants(constants, ids, args.out)
    config = {"metric": args.metric, "density": density.label()}
    _run_manifest(args.out, args, config, _inputs(args, "refs", "test", "manifest"))
    print(f"wrote {density.label()} constants for {len(constants)} sections to {args.out}")


def _method_config(args) -> MethodConfig:
    common = dict(
        metric=args.metric,
        density=_density(args),
        k=args.k,
        k_clusters=args.k_clusters,
        smote_neighbors=args.smote_neighbors,
        oversample_to=args.oversample_to,
        lof_k=args.lof_k,
        seed=args.seed,
    )
    if args.method == "ensemble_mean":
        if not args.members:
            raise UsageError("ensemble_mean needs --members")
        members = [MethodConfig(m.strip(), **common) for m in args.members.split(",")]
        return MethodConfig("ensemble_mean", members=members, **common)
    return MethodConfig(args.method, **common)


def cmd_score(args):
    try:
        cfg = _method_config(args)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if cfg.batch_dependent:
        if args.single_sample:
            raise UsageError(f"{cfg.method} depends on the whole test batch and cannot score single samples")
        if not args.allow_batch_dependent:
            raise UsageError(
                f"{cfg.method} scores depend on the whole test batch; pass --allow-batch-dependent to run it"
            )
    for note in cfg.caveats:
        print(f"note: {note}", file=sys.stderr)
    ds = _load(args)
    constants = None
    if args.constants:
        constants, _ = fio.read_constants(args.constants)
    indices = section_indices(ds, cfg.metric)
    if constants is not None:
        for sec, c in constants.items():
            if sec in indices and c.refs_fingerprint != indices[sec].fingerprint:
                raise IntegrityError(f"constants for section {sec!r} are stale (references changed)")
    if args.single_sample:
        scores = _score_one_by_one(ds, cfg, indices, constants)
    else:
        scores = score_dataset(ds, cfg, indices, constants)
    fio.write_scores(scores, args.out)
    _run_manifest(args.out, args, cfg.to_dict(), _inputs(args, "refs", "test", "manifest", "constants"), cfg.seed)
    print(f"wrote {len(scores)} {cfg.method} scores to {args.out}")


def _score_one_by_one(ds, cfg, indices, constants):
    test_rows = ds.rows(split="test")
    scorers = {}
    values = np.empty(test_rows.size)
    for k, r in enumerate(test_rows):
        sec = ds.metas[r].section
        if sec not in scorers:
            idx = indices[sec]
            if constants is not None and sec in constants:
                idx = idx.with_constants(constants[sec])
            scorers[sec] = make_scorer(idx, cfg)
        values[k] = scorers[sec](ds.embeddings[r : r + 1])[0]
    return ScoreVector(tuple(ds.metas[r].id for r in test_rows), values)


def cmd_evaluate(args):
    scores = fio.read_scores(args.scores)
    metas = fio.read_manifest(args.manifest)
    report = evaluate(metas, scores, args.p, args.agg, method=Path(args.scores).stem)
    fio.write_report(report, args.out)
    _run_manifest(args.out, args, {"p": args.p, "agg": args.agg}, _inputs(args, "scores", "manifest"))
    for s in report.sections:
        src = "-" if s.auc_source is None else f"{s.auc_source:.4f}"
        tgt = "-" if s.auc_target is None else f"{s.auc_target:.4f}"
        print(f"{s.section}: auc={s.auc:.4f} auc_source={src} auc_target={tgt} pauc={s.pauc:.4f}")
    print(f"{args.agg} aggregate: {report.aggregate:.4f}")


def _parse_values(text, param):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --values {text!r}") from None
    if not values:
        raise UsageError("empty hyperparameter grid")
    if param == "k" and any(v != int(v) for v in values):
        raise UsageError("--param k needs integer values")
    return values


def cmd_sweep(args):
    values = _parse_values(args.values, args.param)
    ds = _load(args)
    family = "knn" if args.param == "k" else "gwrp"
    if family == "gwrp" and args.variant == "difference":
        print("note: difference variant with a gwrp density is an extrapolation; treat its results as exploratory",
              file=sys.stderr)
    rows = sweep(ds, family, values, args.p, args.agg, args.variant, args.metric)
    fio.write_sweep_table(rows, args.out, args.param)
    config = {"param": args.param, "values": values, "variant": args.variant, "metric": args.metric, "p": args.p, "agg": args.agg}
    _run_manifest(args.out, args, config, _inputs(args, "refs", "test", "manifest"))
    for r in rows:
        print(f"{args.param}={r.param:g}: aggregate={r.aggregate:.4f} auc_source={r.auc_source:.4f} auc_target={r.auc_target:.4f}")


def cmd_hist(args):
    scores = fio.read_scores(args.scores)
    groups = None
    if args.manifest:
        by_id = {m.id: m for m in fio.read_manifest(args.manifest)}
        groups = [f"{by_id[i].domain}_{by_id[i].condition}" if i in by_id else "unlabeled" for i in scores.ids]
    edges, counts = fio.histogram(scores.scores, args.bins, groups)
    fio.write_histogram(edges, counts, args.out)
    _run_manifest(args.out, args, {"bins": args.bins}, _inputs(args, "scores", "manifest"))
    print(f"wrote {args.bins}-bin histogram of {len(scores)} scores to {args.out}")


def _add_data_args(p):
    p.add_argument("--refs", "--embeddings", dest="refs", required=True,
                   help="NPY or CSV embeddings (all rows, or the reference rows when --test is given)")
    p.add_argument("--test", help="NPY or CSV test embeddings appended after --refs rows")
    p.add_argument("--manifest", required=True, help="JSON manifest covering every row")


def _add_density_args(p):
    p.add_argument("--metric", choices=METRICS, default="cosine")
    p.add_argument("--density", choices=("knn", "gwrp"), default="knn")
    p.add_argument("--k", type=int, default=1, help="K of the knn density (also k of baseline_knn_mean)")
    p.add_argument("--r", type=float, default=0.0, help="weight factor of the gwrp density")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldnorm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic domain-shift benchmark")
    p.add_argument("--config", help="JSON file with SynthConfig fields (defaults otherwise)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("precompute", help="precompute per-section density constants")
    _add_data_args(p)
    _add_density_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("score", help="score every test row")
    _add_data_args(p)
    _add_density_args(p)
    p.add_argument("--method", choices=METHODS, default="norm_ratio")
    p.add_argument("--members", help="comma-separated methods for ensemble_mean")
    p.add_argument("--k-clusters", type=int, default=16)
    p.add_argument("--smote-neighbors", type=int, default=4)
    p.add_argument("--oversample-to", type=int)
    p.add_argument("--lof-k", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--constants", help="constants cache written by 'precompute'")
    p.add_argument("--single-sample", action="store_true", help="score each test row in isolation")
    p.add_argument("--allow-batch-dependent", action="store_true",
                   help="permit methods whose scores depend on the whole test batch")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="AUC / pAUC report from a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--agg", choices=("harmonic", "arithmetic"), default="harmonic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="evaluate normalized scoring over a grid of K or r")
    _add_data_args(p)
    p.add_argument("--param", choices=("k", "r"), required=True)
    p.add_argument("--values", required=True, help="comma-separated grid, e.g. 1,2,4,8,16")
    p.add_argument("--variant", choices=("ratio", "difference"), default="ratio")
    p.add_argument("--metric", choices=METRICS, default="cosine")
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--agg", choices=("harmonic", "arithmetic"), default="harmonic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hist", help="score histogram as CSV, optionally split by domain/condition")
    p.add_argument("--scores", required=True)
    p.add_argument("--manifest")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hist)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except IntegrityError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (UsageError, DataError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0
