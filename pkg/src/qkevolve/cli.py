"""Command-line front end.

    qkevolve run --dataset moons --technique supervised --repeats 10 --out runs/moons
    qkevolve boundary --dataset moons --replay runs/moons/replay/run_001.json --out runs/moons
    qkevolve entropy-trend runs/moons runs/xor runs/circles
    qkevolve report runs/moons runs/moons-rbf

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, kernels, svm
from .data import DATASET_NAMES, DataError, Splits, load_dataset, preprocess
from .evolve import EvolveConfig, EvolveResult, Technique, evolve, summarize, train_qsvm

log = logging.getLogger("qkevolve")

TECHNIQUES = ("supervised", "unsupervised", "pauli-zz", "rbf")
GA_TECHNIQUES = ("supervised", "unsupervised")
RESULT_HEADER = ("dataset", "technique", "test", "acc", "ent", "gates")
PAULI_ZZ_REPS = 2


class UsageError(Exception):
    pass


# -- single runs -----------------------------------------------------------------

def _baseline_kernel(technique: str, train_X: np.ndarray):
    """Return (gram(A, B), entropy, extra replay fields) for a classical or PauliZZ baseline."""
    if technique == "rbf":
        gamma = kernels.default_rbf_gamma(train_X)
        return (lambda A, B=None: kernels.rbf_kernel(A, B, gamma)), 0.0, {"gamma": gamma}
    ent = kernels.pauli_zz_entropy(train_X, PAULI_ZZ_REPS)
    return (lambda A, B=None: kernels.pauli_zz_kernel(A, B, PAULI_ZZ_REPS)), ent, {"reps": PAULI_ZZ_REPS}


def execute_run(dataset: str, technique: str, seed: int, config: EvolveConfig, test: int = 1,
                pca_on_full: bool = False, data_dir=None) -> dict:
    """One repeat: data generation, split, GA or baseline, held-out evaluation, all driven by ``seed``."""
    data = load_dataset(dataset, seed=seed, data_dir=data_dir)
    splits = preprocess(data, seed=seed, pca_on_full=pca_on_full).splits
    replay = {"dataset": dataset, "technique": technique, "test": test, "seed": seed, "pca_on_full": pca_on_full}
    if technique in GA_TECHNIQUES:
        cfg = EvolveConfig(**{**config.to_dict(), "technique": technique, "seed": seed})
        res = evolve(cfg, splits)
        row = {"acc": res.test_accuracy, "ent": res.entropy, "gates": res.gate_count}
        replay["result"] = res.to_dict()
    else:
        gram, ent, extra = _baseline_kernel(technique, splits.train.X)
        model = svm.train_multiclass(gram(splits.train.X), splits.train.y, config.svm_c)
        pred = svm.predict(model, gram(splits.test.X, splits.train.X))
        row = {"acc": svm.accuracy(pred, splits.test.y), "ent": ent, "gates": None}
        replay.update(extra, svm_c=config.svm_c, model=json.loads(model.to_json()))
    row.update(dataset=dataset, technique=technique, test=test)
    replay.update(acc=row["acc"], ent=row["ent"], gates=row["gates"])
    return {"row": row, "replay": replay}


def _execute(job: tuple) -> dict:
    return execute_run(*job)


def run_repeats(dataset: str, technique: str, seed: int, repeats: int, config: EvolveConfig,
                pca_on_full: bool = False, data_dir=None, jobs: int = 1) -> list[dict]:
    """Run ``repeats`` independent tests; test i (1-based) uses seed + i - 1."""
    if repeats < 1:
        raise UsageError("--repeats must be >= 1")
    work = [(dataset, technique, seed + i, config, i + 1, pca_on_full, data_dir) for i in range(repeats)]
    if jobs > 1 and repeats > 1:
        with ProcessPoolExecutor(min(jobs, repeats)) as pool:
            return list(pool.map(_execute, work))
    return [_execute(w) for w in work]


# -- files -----------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results(out: Path, runs: list[dict], config: EvolveConfig, dataset: str, technique: str) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    (out / "replay").mkdir(exist_ok=True)
    with (out / "results.csv").open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in runs:
            w.writerow([_fmt(r["row"][k]) for k in RESULT_HEADER])
    for r in runs:
        path = out / "replay" / f"run_{r['row']['test']:03d}.json"
        path.write_text(json.dumps(r["replay"], indent=1, sort_keys=True) + "\n")
    rows = [r["row"] for r in runs]
    gates = [r["gates"] for r in rows] if technique in GA_TECHNIQUES else None
    summary = {"dataset": dataset, "technique": technique,
               **summarize([r["acc"] for r in rows], [r["ent"] for r in rows], gates),
               "config": config.to_dict()}
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary


def read_results(path: Path) -> list[dict]:
    with path.open(newline="") as f:
        reader = csv.reader(f)
        header = tuple(next(reader, ()))
        if header != RESULT_HEADER:
            raise DataError(f"{path}: unexpected header {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(RESULT_HEADER):
                raise DataError(f"{path}:{lineno}: expected {len(RESULT_HEADER)} columns")
            d = dict(zip(RESULT_HEADER, rec))
            rows.append({"dataset": d["dataset"], "technique": d["technique"], "test": int(d["test"]),
                         "acc": float(d["acc"]), "ent": float(d["ent"]),
                         "gates": int(d["gates"]) if d["gates"] else None})
    return rows


def _require(dirs, names=("results.csv",)) -> None:
    missing = [str(Path(d) / n) for d in dirs for n in names if not (Path(d) / n).is_file()]
    if missing:
        raise DataError("missing result files: " + ", ".join(missing))


# -- analysis ---------------------------------------------------------------------

def ols(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept of y on x."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two points for a regression")
    dx = x - x.mean()
    sxx = dx @ dx
    # a spread below ~1e-9 is round-off in entropies that are exactly zero analytically
    if sxx <= 1e-18 * len(x):
        raise ValueError("entropy has zero variance; the slope is undefined")
    slope = float(dx @ (y - y.mean()) / sxx)
    return slope, float(y.mean() - slope * x.mean())


def entropy_trend(dirs) -> tuple[float, float, list[dict]]:
    _require(dirs)
    rows = [r for d in dirs for r in read_results(Path(d) / "results.csv") if r["technique"] in GA_TECHNIQUES]
    slope, intercept = ols([r["ent"] for r in rows], [r["acc"] for r in rows])
    return slope, intercept, rows


def report(dirs) -> str:
    """Per-dataset tables: one Acc/Ent/Gates column group per technique, then a mean row."""
    _require(dirs, ("results.csv", "summary.json"))
    by_dataset: dict[str, dict[str, list[dict]]] = {}
    for d in dirs:
        for r in read_results(Path(d) / "results.csv"):
            by_dataset.setdefault(r["dataset"], {}).setdefault(r["technique"], []).append(r)
    blocks = []
    for name in sorted(by_dataset):
        groups = by_dataset[name]
        techs = [t for t in TECHNIQUES if t in groups]
        head = ["Test"] + [f"{t} {c}" for t in techs for c in ("Acc", "Ent", "Gates")]
        n = max(len(groups[t]) for t in techs)
        lines = [f"## {name}", " | ".join(head)]
        for i in range(n):
            cells = [str(i + 1)]
            for t in techs:
                r = groups[t][i] if i < len(groups[t]) else None
                if r is None:
                    cells += ["", "", ""]
                else:
                    cells += [f"{r['acc']:.3f}", f"{r['ent']:.3f}", "" if r["gates"] is None else str(r["gates"])]
            lines.append(" | ".join(cells))
        mean = ["Mean"]
        for t in techs:
            rs = groups[t]
            g = [r["gates"] for r in rs if r["gates"] is not None]
            mean += [f"{np.mean([r['acc'] for r in rs]):.3f}", f"{np.mean([r['ent'] for r in rs]):.3f}",
                     f"{np.mean(g):.1f}" if g else ""]
        lines.append(" | ".join(mean))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def decision_grid(dataset: str, technique: str, seed: int, config: EvolveConfig, resolution: int = 200,
                  pad: float = 0.1, replay: dict | None = None, pca_on_full: bool = False, data_dir=None):
    """Decision values on a resolution x resolution lattice over the padded box of the scaled points.

    For two classes the value is the one-vs-rest score of the second class, so
    its sign marks the boundary; with more classes it is the winning score.
    Returns (grid rows, point rows).
    """
    if resolution < 1:
        raise UsageError("--resolution must be >= 1")
    if replay is not None:
        seed, pca_on_full = replay["seed"], replay.get("pca_on_full", pca_on_full)
        technique = replay["technique"]
    data = load_dataset(dataset, seed=seed, data_dir=data_dir)
    splits: Splits = preprocess(data, seed=seed, pca_on_full=pca_on_full).splits
    if splits.train.n_features != 2:
        raise DataError(f"decision grids need 2 features after PCA; {dataset} has {splits.train.n_features}")
    train = splits.train
    if technique in GA_TECHNIQUES:
        if replay is not None:
            chromosome = EvolveResult.from_dict(replay["result"]).best
        else:
            cfg = EvolveConfig(**{**config.to_dict(), "technique": technique, "seed": seed})
            chromosome = evolve(cfg, splits).best
        model, _ = train_qsvm(chromosome, train, config.svm_c)
        gram = lambda A, B=None: kernels.quantum_kernel(chromosome, A, B)  # noqa: E731
    else:
        gram, _, _ = _baseline_kernel(technique, train.X)
        model = svm.train_multiclass(gram(train.X), train.y, config.svm_c)
    pts = np.vstack([train.X, splits.test.X])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    lo, hi = lo - pad * span, hi + pad * span
    xs, ys = np.linspace(lo[0], hi[0], resolution), np.linspace(lo[1], hi[1], resolution)
    G = np.array([(x, y) for y in ys for x in xs])
    scores = svm.decision_matrix(model, gram(G, train.X))
    values = scores[:, 1] if len(model.classes) == 2 else scores.max(axis=1)
    labels = svm.predict(model, gram(G, train.X))
    grid = [(float(x), float(y), float(v), int(lab)) for (x, y), v, lab in zip(G, values, labels)]
    points = [(float(x), float(y), int(lab), "train") for (x, y), lab in zip(train.X, train.y)]
    points += [(float(x), float(y), int(lab), "test") for (x, y), lab in zip(splits.test.X, splits.test.y)]
    return grid, points


# -- argument handling -----------------------------------------------------------------

def _read_config_file(path: str) -> dict:
    """key = value lines; '#' starts a comment; keys use flag names with - or _."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.lstrip("-").replace("-", "_")] = v.strip("\"'")
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", choices=DATASET_NAMES, required=True)
    p.add_argument("--technique", choices=TECHNIQUES, default="supervised")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pop-size", type=int, default=EvolveConfig.population_size)
    p.add_argument("--mutation-prob", type=float, default=EvolveConfig.mutation_prob)
    p.add_argument("--max-generations", type=int, default=EvolveConfig.max_generations)
    p.add_argument("--target-fitness", type=float, default=None)
    p.add_argument("--svm-c", type=float, default=EvolveConfig.svm_c)
    p.add_argument("--pca-on-full", action="store_true", help="fit PCA on the whole dataset, not the training split")
    p.add_argument("--data-dir", default=None, help="directory holding external dataset CSVs")
    p.add_argument("--out", default="qkevolve-out")
    p.add_argument("--config", default=None, help="key = value file; flags given on the command line win")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="qkevolve", description="Evolve quantum-kernel circuits for QSVMs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="repeated GA or baseline runs")
    _add_common(run)
    run.add_argument("--repeats", type=int, default=10)
    run.add_argument("--jobs", type=int, default=1, help="parallel worker processes for the repeats")

    bnd = sub.add_parser("boundary", help="decision-function grid for a 2-feature dataset")
    _add_common(bnd)
    bnd.add_argument("--resolution", type=int, default=200)
    bnd.add_argument("--replay", default=None, help="replay JSON from a previous run to reuse its model")

    trend = sub.add_parser("entropy-trend", help="least-squares fit of accuracy on entropy")
    trend.add_argument("dirs", nargs="+")
    trend.add_argument("--out", default=None, help="write the pooled series as CSV")

    rep = sub.add_parser("report", help="per-dataset result tables")
    rep.add_argument("dirs", nargs="+")
    rep.add_argument("--out", default=None)
    return parser, {"run": run, "boundary": bnd}


def _apply_config_file(sub: argparse.ArgumentParser, path: str) -> None:
    """Turn config-file entries into subcommand defaults so explicit flags still override them."""
    values = _read_config_file(path)
    actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key == "config":
            raise UsageError(f"{path}: unknown key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):  # noqa: SLF001
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = action.type(raw) if action.type else raw
            except ValueError:
                raise UsageError(f"{path}: bad value for {key}: {raw!r}") from None
        if action.choices and value not in action.choices:
            raise UsageError(f"{path}: {key} must be one of {', '.join(action.choices)}")
        defaults[key] = value
    for action in sub._actions:  # noqa: SLF001
        if action.dest in defaults:
            action.required = False
    sub.set_defaults(**defaults)


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in subs), None)
    if known.config and command:
        try:
            _apply_config_file(subs[command], known.config)
        except (OSError, UsageError) as exc:
            parser.error(str(exc))
    return parser.parse_args(argv)


def _evolve_config(args) -> EvolveConfig:
    try:
        return EvolveConfig(
            population_size=args.pop_size,
            mutation_prob=args.mutation_prob,
            max_generations=args.max_generations,
            target_fitness=args.target_fitness,
            technique=Technique.UNSUPERVISED if args.technique == "unsupervised" else Technique.SUPERVISED,
            svm_c=args.svm_c,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_rows(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows([_fmt(v) for v in r] for r in rows)


def _dispatch(args) -> None:
    if args.command == "run":
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        cfg = _evolve_config(args)
        runs = run_repeats(args.dataset, args.technique, args.seed, args.repeats, cfg, args.pca_on_full,
                           args.data_dir, args.jobs)
        summary = write_results(Path(args.out), runs, cfg, args.dataset, args.technique)
        print(f"{args.dataset} {args.technique}: mean acc {summary['mean_accuracy']:.3f} "
              f"+- {summary['std_accuracy']:.3f}, mean ent {summary['mean_entropy']:.3f} -> {args.out}")
    elif args.command == "boundary":
        replay = json.loads(Path(args.replay).read_text()) if args.replay else None
        grid, points = decision_grid(args.dataset, args.technique, args.seed, _evolve_config(args),
                                     args.resolution, replay=replay, pca_on_full=args.pca_on_full,
                                     data_dir=args.data_dir)
        out = Path(args.out)
        _write_rows(out / "boundary.csv", ("x", "y", "value", "label"), grid)
        _write_rows(out / "boundary_points.csv", ("x", "y", "label", "split"), points)
        print(f"wrote {len(grid)} grid rows to {out / 'boundary.csv'}")
    elif args.command == "entropy-trend":
        slope, intercept, rows = entropy_trend(args.dirs)
        if args.out:
            _write_rows(Path(args.out), ("dataset", "technique", "test", "ent", "acc"),
                        [(r["dataset"], r["technique"], r["test"], r["ent"], r["acc"]) for r in rows])
        print(json.dumps({"slope": slope, "intercept": intercept, "n": len(rows)}))
    elif args.command == "report":
        text = report(args.dirs)
        if args.out:
            Path(args.out).write_text(text)
        sys.stdout.write(text)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        _dispatch(args)
    except UsageError as exc:
        print(f"qkevolve: usage error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError, ValueError, KeyError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"qkevolve: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
