"""Command-line entry point: map, train, eval, analyze, synth, rerun.

Every subcommand writes a ``key=value`` run manifest next to its outputs
(recording the resolved flags, input digests, seed, and the exact argv).
``gatefuse rerun <manifest>`` replays the recorded argv; since all
randomness is seeded, reruns reproduce outputs byte for byte.

Exit codes: 0 success, 1 domain error, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import shlex
import sys

import numpy as np

from . import __version__
from .analysis import load_concreteness, ratio_report
from .benchmark import format_results, load_benchmark, run_suite, write_results_tsv
from .embeddings import load_embeddings
from .errors import GatefuseError
from .gates import (
    build_fused_table,
    initialize_gate_model,
    load_gate_model,
    load_supersense_map,
    save_gate_model,
)
from .mapping import fit_ridge, load_mapping, predict_table, save_mapping, select_lambda
from .synthetic import SyntheticSpec, generate, write_corpus
from .training import TrainConfig, load_pairs, train


class UsageError(Exception):
    """Bad flag combination or missing required flag (exit code 2)."""


GATE_KINDS = {"m": "modality", "c": "category", "s": "sample"}
GATE_FORMS = {"val": "value", "vec": "vector"}

_DEFAULTS: dict[str, dict] = {
    "map": {"folds": 5, "seed": 0},
    "train": {
        "threshold": 0.2,
        "lr_grid": [0.05, 0.01, 0.5, 0.1],
        "batch": 25,
        "epochs": 5,
        "margin": 1.0,
        "seed": 0,
        "repeats": 1,
    },
    "eval": {},
    "analyze": {"top_k": 10},
    "synth": {
        "vocab": 500,
        "dim": 16,
        "pairs": 400,
        "frac_abstract": 0.5,
        "noise": 0.25,
        "seed": 0,
        "visual_coverage": 0.6,
    },
}


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise UsageError(f"bad float list {text!r}: {exc}") from None


_CONVERTERS = {
    "lam": float,
    "lambda_grid": _csv_floats,
    "folds": int,
    "seed": int,
    "threshold": float,
    "lr_grid": _csv_floats,
    "batch": int,
    "epochs": int,
    "margin": float,
    "repeats": int,
    "top_k": int,
    "vocab": int,
    "dim": int,
    "pairs": int,
    "frac_abstract": float,
    "noise": float,
    "visual_coverage": float,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gatefuse",
        description="Multimodal word representations via gated modality fusion",
    )
    parser.add_argument("--version", action="version", version=f"gatefuse {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("map", help="fit the linguistic-to-visual ridge mapping")
    p.add_argument("--ling")
    p.add_argument("--visual")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--lambda-grid", dest="lambda_grid", type=_csv_floats)
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("train", help="train gate parameters on association pairs")
    p.add_argument("--ling")
    p.add_argument("--visual")
    p.add_argument("--mapping")
    p.add_argument("--pairs")
    p.add_argument("--gate", choices=sorted(GATE_KINDS) + sorted(GATE_KINDS.values()))
    p.add_argument("--form", choices=sorted(GATE_FORMS) + sorted(GATE_FORMS.values()))
    p.add_argument("--supersenses")
    p.add_argument("--threshold", type=float)
    p.add_argument("--lr-grid", dest="lr_grid", type=_csv_floats)
    p.add_argument("--batch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--benchmarks", nargs="*", metavar="NAME=PATH")
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("eval", help="score tables on similarity benchmarks")
    p.add_argument("--tables", nargs="+", metavar="NAME=PATH")
    p.add_argument("--benchmarks", nargs="+", metavar="NAME=PATH")
    p.add_argument("--visual-vocab", dest="visual_vocab")
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("analyze", help="weight-ratio diagnostics for a gate model")
    p.add_argument("--model")
    p.add_argument("--ling")
    p.add_argument("--visual")
    p.add_argument("--mapping")
    p.add_argument("--concreteness")
    p.add_argument("--supersenses")
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--vocab", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--pairs", type=int)
    p.add_argument("--frac-abstract", dest="frac_abstract", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--visual-coverage", dest="visual_coverage", type=float)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--config")

    p = sub.add_parser("rerun", help="replay a run from its manifest")
    p.add_argument("manifest")

    return parser


def _read_config(path) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}: line {lineno}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(args: argparse.Namespace) -> dict:
    """Merge order: explicit flag > config file entry > hard default."""
    ns = dict(vars(args))
    sub = ns.pop("subcommand")
    ns.pop("func", None)
    config_path = ns.pop("config", None)
    cfg = _read_config(config_path) if config_path else {}
    resolved = {}
    for key, value in ns.items():
        if value is None and key in cfg:
            conv = _CONVERTERS.get(key, str)
            raw = cfg[key]
            value = conv(raw) if not isinstance(raw, list) else raw
        if value is None:
            value = _DEFAULTS.get(sub, {}).get(key)
        resolved[key] = value
    resolved["subcommand"] = sub
    return resolved


def _require(resolved: dict, *keys: str) -> None:
    for key in keys:
        if resolved.get(key) in (None, []):
            raise UsageError(f"--{key.replace('_', '-')} is required")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _flag_text(value) -> str:
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def write_manifest(path, resolved: dict, argv: list[str], digests: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tool=gatefuse\n")
        fh.write(f"version={__version__}\n")
        fh.write(f"subcommand={resolved['subcommand']}\n")
        fh.write(f"argv={shlex.join(argv)}\n")
        if resolved.get("seed") is not None:
            fh.write(f"seed={resolved['seed']}\n")
        for key in sorted(k for k in resolved if k != "subcommand"):
            if resolved[key] is not None:
                fh.write(f"flag.{key}={_flag_text(resolved[key])}\n")
        for key in sorted(digests):
            fh.write(f"digest.{key}={digests[key]}\n")


def read_manifest(path) -> dict[str, str]:
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or "=" not in line:
                continue
            key, value = line.split("=", 1)
            entries[key] = value
    return entries


def _parse_named(tokens: list[str], what: str) -> list[tuple[str, str]]:
    out = []
    for token in tokens:
        if "=" in token:
            name, path = token.split("=", 1)
        else:
            name, path = token, token
        if not name or not path:
            raise UsageError(f"bad {what} spec {token!r}, expected NAME=PATH")
        out.append((name, path))
    return out


def cmd_map(resolved: dict, argv: list[str]) -> int:
    _require(resolved, "ling", "visual", "out")
    if (resolved["lam"] is None) == (resolved["lambda_grid"] is None):
        raise UsageError("give exactly one of --lambda or --lambda-grid")
    ling = load_embeddings(resolved["ling"])
    visual = load_embeddings(resolved["visual"])
    common = [w for w in visual.words if w in ling]
    if not common:
        raise GatefuseError("no shared vocabulary between linguistic and visual tables")
    L_v = np.vstack([ling.row(w) for w in common])
    V = np.vstack([visual.row(w) for w in common])
    if resolved["lambda_grid"] is not None:
        best, mses = select_lambda(
            L_v, V, resolved["lambda_grid"], resolved["folds"], resolved["seed"]
        )
        print("lambda\tcv_mse")
        for lam, mse in zip(resolved["lambda_grid"], mses):
            print(f"{lam:g}\t{mse:.6g}")
        lam = best
    else:
        lam = resolved["lam"]
    model = fit_ridge(L_v, V, lam)
    save_mapping(model, resolved["out"])
    print(f"lambda={lam:g} rows={len(common)} -> {resolved['out']}")
    digests = {k: _sha256(resolved[k]) for k in ("ling", "visual")}
    write_manifest(resolved["out"] + ".manifest", resolved, argv, digests)
    return 0


def cmd_train(resolved: dict, argv: list[str]) -> int:
    _require(resolved, "ling", "visual", "mapping", "pairs", "gate", "form", "out")
    kind = GATE_KINDS.get(resolved["gate"], resolved["gate"])
    form = GATE_FORMS.get(resolved["form"], resolved["form"])
    ling = load_embeddings(resolved["ling"])
    visual = load_embeddings(resolved["visual"])
    mapping = load_mapping(resolved["mapping"])
    predicted = predict_table(ling, mapping)
    supersense_map = (
        load_supersense_map(resolved["supersenses"]) if resolved["supersenses"] else None
    )
    benchmarks = []
    bench_vocab: set[str] = set()
    if resolved["benchmarks"]:
        for name, path in _parse_named(resolved["benchmarks"], "benchmark"):
            bench = load_benchmark(path, name)
            benchmarks.append(bench)
            bench_vocab |= bench.vocab()
    train_set, dev_set = load_pairs(
        resolved["pairs"], resolved["threshold"], bench_vocab, ling.vocab()
    )
    senses = sorted(set(supersense_map.values())) if supersense_map else ()
    repeats = resolved["repeats"]
    bench_rows: dict[tuple[str, str], list] = {}
    for r in range(repeats):
        seed = resolved["seed"] + r
        config = TrainConfig(
            learning_rates=tuple(resolved["lr_grid"]),
            batch_size=resolved["batch"],
            epochs=resolved["epochs"],
            margin=resolved["margin"],
            seed=seed,
        )
        model = initialize_gate_model(kind, form, ling.dimension, senses, seed=seed)
        best, report = train(
            model, train_set, dev_set, ling, predicted, config, supersense_map
        )
        out = resolved["out"] if repeats == 1 else f"{resolved['out']}.r{r}"
        save_gate_model(best, out)
        with open(out + ".report", "w", encoding="utf-8") as fh:
            fh.write(report.to_text())
        print(
            f"repeat={r} seed={seed} best_lr={report.best_lr} "
            f"best_epoch={report.best_epoch} best_dev={report.best_dev} -> {out}"
        )
        if benchmarks:
            fused = build_fused_table(ling, predicted, best, supersense_map)
            for name, result in run_suite(
                [(f"{kind}-{form}", fused)], benchmarks, visual.vocab()
            ):
                bench_rows.setdefault((result.dataset, result.region), []).append(result)
    if benchmarks:
        path = resolved["out"] + ".bench.tsv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("model\tdataset\tregion\trho\tused\tskipped\n")
            for (dataset, region), results in bench_rows.items():
                defined = [x.rho for x in results if x.defined]
                cell = f"{np.mean(defined):.6f}" if defined else "NA"
                fh.write(
                    f"{kind}-{form}\t{dataset}\t{region}\t{cell}\t"
                    f"{results[0].pairs_used}\t{results[0].pairs_skipped}\n"
                )
        print(f"benchmark means over {repeats} repeats -> {path}")
    digests = {k: _sha256(resolved[k]) for k in ("ling", "visual", "mapping", "pairs")}
    if resolved["supersenses"]:
        digests["supersenses"] = _sha256(resolved["supersenses"])
    if resolved["benchmarks"]:
        for name, path in _parse_named(resolved["benchmarks"], "benchmark"):
            digests[f"benchmarks.{name}"] = _sha256(path)
    write_manifest(resolved["out"] + ".manifest", resolved, argv, digests)
    return 0


def cmd_eval(resolved: dict, argv: list[str]) -> int:
    _require(resolved, "tables", "benchmarks", "visual_vocab", "out")
    tables = [
        (name, load_embeddings(path))
        for name, path in _parse_named(resolved["tables"], "table")
    ]
    benchmarks = [
        load_benchmark(path, name)
        for name, path in _parse_named(resolved["benchmarks"], "benchmark")
    ]
    with open(resolved["visual_vocab"], encoding="utf-8") as fh:
        visual_vocab = {line.strip() for line in fh if line.strip()}
    rows = run_suite(tables, benchmarks, visual_vocab)
    write_results_tsv(rows, resolved["out"])
    print(format_results(rows))
    digests = {
        f"tables.{name}": _sha256(path)
        for name, path in _parse_named(resolved["tables"], "table")
    }
    digests.update(
        {
            f"benchmarks.{name}": _sha256(path)
            for name, path in _parse_named(resolved["benchmarks"], "benchmark")
        }
    )
    digests["visual_vocab"] = _sha256(resolved["visual_vocab"])
    write_manifest(resolved["out"] + ".manifest", resolved, argv, digests)
    return 0


def cmd_analyze(resolved: dict, argv: list[str]) -> int:
    _require(resolved, "model", "ling", "concreteness", "out")
    if not resolved["mapping"] and not resolved["visual"]:
        raise UsageError("give --mapping (to predict visual vectors) or --visual")
    model = load_gate_model(resolved["model"])
    ling = load_embeddings(resolved["ling"])
    if resolved["mapping"]:
        predicted = predict_table(ling, load_mapping(resolved["mapping"]))
    else:
        predicted = load_embeddings(resolved["visual"])
    conc = load_concreteness(resolved["concreteness"])
    supersense_map = (
        load_supersense_map(resolved["supersenses"]) if resolved["supersenses"] else None
    )
    report = ratio_report(
        model, ling, predicted, conc, supersense_map, k=resolved["top_k"]
    )
    with open(resolved["out"], "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    print(
        f"concrete_mean={report.concrete_mean:.4f} "
        f"abstract_mean={report.abstract_mean:.4f} "
        f"rho={report.correlation if report.correlation_defined else 'NA'} "
        f"-> {resolved['out']}"
    )
    digests = {"model": _sha256(resolved["model"]), "ling": _sha256(resolved["ling"])}
    for key in ("visual", "mapping", "concreteness", "supersenses"):
        if resolved[key]:
            digests[key] = _sha256(resolved[key])
    write_manifest(resolved["out"] + ".manifest", resolved, argv, digests)
    return 0


def cmd_synth(resolved: dict, argv: list[str]) -> int:
    import os

    _require(resolved, "out_dir")
    spec = SyntheticSpec(
        vocab_size=resolved["vocab"],
        dim=resolved["dim"],
        n_pairs=resolved["pairs"],
        frac_abstract=resolved["frac_abstract"],
        noise=resolved["noise"],
        seed=resolved["seed"],
        visual_coverage=resolved["visual_coverage"],
    )
    corpus = generate(spec)
    paths = write_corpus(corpus, resolved["out_dir"])
    for name, path in paths.items():
        print(f"{name} -> {path}")
    digests = {name: _sha256(path) for name, path in paths.items()}
    write_manifest(os.path.join(resolved["out_dir"], "manifest.txt"), resolved, argv, digests)
    return 0


def cmd_rerun(resolved: dict, argv: list[str]) -> int:
    entries = read_manifest(resolved["manifest"])
    if "argv" not in entries:
        raise GatefuseError(f"{resolved['manifest']}: manifest has no argv entry")
    return _run(shlex.split(entries["argv"]))


_COMMANDS = {
    "map": cmd_map,
    "train": cmd_train,
    "eval": cmd_eval,
    "analyze": cmd_analyze,
    "synth": cmd_synth,
    "rerun": cmd_rerun,
}


def _run(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    resolved = _resolve(args)
    return _COMMANDS[resolved["subcommand"]](resolved, argv)


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        return _run(list(argv))
    except SystemExit as exc:  # argparse --help (0) and usage errors (2)
        code = exc.code
        return code if isinstance(code, int) else 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GatefuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
