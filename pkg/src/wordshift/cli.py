"""Command-line pipeline: train, detect, bench.

Every run is reproducible from a flat key=value config file plus a seed;
any config key can be overridden by the same-named flag. Artifacts are
plain files hashed into a run manifest, so each stage can be rerun or
inspected independently.

Exit codes: 0 success, 2 input error, 3 missing artifact, 64 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from . import series as series_mod
from .alignment import align_all_to_base, default_neighborhood, write_residuals_csv
from .changepoint import DetectorConfig, detect_ensemble, normalize_ensemble, write_report_csv
from .corpus import (PLAIN, TAGGED, CorpusFormatError, EmptyVocabularyError,
                     MissingWordError, TemporalCorpus, build_common_vocabulary)
from .embedding import (TrainingConfig, TrainingDivergedError,
                        load_embeddings, save_embeddings, train_corpus)
from .synthbench import run_bench, write_bench_csv
from .textgen import GeneratorConfig, generate_corpus, read_stopword_file, write_stopword_file
from .corpus import load_snapshot

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MISSING_ARTIFACT = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class MissingArtifactError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _methods(value):
    methods = [m.strip() for m in str(value).split(",") if m.strip()]
    if not methods:
        raise UsageError("no method selected")
    for m in methods:
        if m not in series_mod.METHODS:
            raise UsageError(f"unknown method {m!r}")
    return methods


def _float_grid(value):
    try:
        grid = [float(x) for x in str(value).split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad p-replacement grid: {exc}")
    if not grid or any(not 0.0 <= p <= 1.0 for p in grid):
        raise UsageError("p-replacement values must lie in [0, 1]")
    return grid


def _bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"bad boolean {value!r}")


# config-file keys and their converters; flags reuse the same names
_CONVERTERS = {
    "manifest": str,
    "method": _methods,
    "dim": int,
    "window": int,
    "subsample": float,
    "epochs": int,
    "alpha": float,
    "tolerance": float,
    "seed": int,
    "k": int,
    "ridge": float,
    "bootstrap": int,
    "gamma": float,
    "significance": float,
    "min_count": int,
    "out": str,
    "deterministic": _bool,
    "workers": int,
    "tagged": _bool,
    "lowercase": _bool,
    "end_to_end": _bool,
    "base_corpus": str,
    "gen_tokens": int,
    "snapshots": int,
    "pairs": int,
    "p_grid": _float_grid,
    "stopwords": str,
    "same_pos": _bool,
    "dump_residuals": _bool,
}


def parse_config_file(path) -> dict:
    """Flat "key = value" lines; '#' starts a comment; keys match the flags."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _CONVERTERS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _CONVERTERS[key](value.strip())
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from None
    return values


@dataclass
class RunConfig:
    """Everything one pipeline run depends on."""

    manifest: str | None = None
    method: list = None
    dim: int = 200
    window: int = 10
    subsample: float = 1e-5
    epochs: int = 5
    alpha: float = 0.025
    tolerance: float = 1e-4
    seed: int = 1
    k: int | None = None
    ridge: float = 1e-3
    bootstrap: int = 1000
    gamma: float = 1.75
    significance: float = 0.05
    min_count: int = 5
    out: str = "wordshift-out"
    deterministic: bool = False
    workers: int = 1
    tagged: bool = False
    lowercase: bool = False
    end_to_end: bool = False
    base_corpus: str | None = None
    gen_tokens: int = 1_000_000
    snapshots: int = 10
    pairs: int = 20
    p_grid: list = None
    stopwords: str | None = None
    same_pos: bool = False
    dump_residuals: bool = False

    def __post_init__(self):
        if self.method is None:
            self.method = [series_mod.FREQUENCY]
        if self.p_grid is None:
            self.p_grid = [0.2, 0.4, 0.6, 0.8, 1.0]

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(dim=self.dim, window=self.window,
                              subsample=self.subsample, alpha=self.alpha,
                              max_epochs=self.epochs, tolerance=self.tolerance,
                              seed=self.seed)

    def detector_config(self) -> DetectorConfig:
        return DetectorConfig(bootstrap=self.bootstrap, gamma=self.gamma,
                              seed=self.seed, significance=self.significance)

    @property
    def effective_workers(self) -> int:
        return 1 if self.deterministic else max(1, self.workers)


def _add_common_flags(parser):
    parser.add_argument("--config", help="flat key=value config file")
    for key, conv in _CONVERTERS.items():
        flag = "--" + key.replace("_", "-")
        if conv is _bool:
            parser.add_argument(flag, dest=key, action="store_const", const=True,
                                default=None)
        else:
            parser.add_argument(flag, dest=key, type=conv, default=None)


def build_config(args) -> RunConfig:
    values = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for key in _CONVERTERS:
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            values[key] = cli_value
    return RunConfig(**values)


def _sanitize(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", label)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_run_manifest(out_dir: Path, artifacts: dict) -> Path:
    """One "artifact<TAB>path<TAB>sha256" line per produced file."""
    path = out_dir / "run_manifest.tsv"
    with open(path, "w", encoding="utf-8") as fh:
        for name in sorted(artifacts):
            file_path = Path(artifacts[name])
            fh.write(f"{name}\t{file_path}\t{_sha256(file_path)}\n")
    return path


def _load_corpus(config: RunConfig) -> TemporalCorpus:
    if not config.manifest:
        raise UsageError("--manifest is required")
    return TemporalCorpus.from_manifest(
        config.manifest, format=TAGGED if config.tagged else PLAIN,
        lowercase=config.lowercase,
    )


def _embedding_path(out_dir: Path, label: str) -> Path:
    return out_dir / f"embeddings_{_sanitize(label)}.txt"


def _train_into(config: RunConfig, corpus, vocab, out_dir: Path, artifacts: dict):
    spaces = train_corpus(corpus, vocab, config.training_config(),
                          workers=config.effective_workers)
    for space in spaces:
        path = _embedding_path(out_dir, space.label)
        save_embeddings(space, vocab, path)
        artifacts[f"embeddings:{space.label}"] = path
    return spaces


def cmd_train(config: RunConfig) -> int:
    corpus = _load_corpus(config)
    vocab = build_common_vocabulary(corpus, config.min_count)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = {}
    _train_into(config, corpus, vocab, out_dir, artifacts)
    write_run_manifest(out_dir, artifacts)
    print(f"trained {len(corpus)} snapshot(s), |V|={len(vocab)}, d={config.dim}")
    return EXIT_OK


def _load_spaces(config: RunConfig, corpus, vocab, out_dir: Path):
    spaces = []
    for label in corpus.labels:
        path = _embedding_path(out_dir, label)
        if not path.exists():
            raise MissingArtifactError(f"expected embedding file {path}")
        space, words = load_embeddings(path, label=label)
        if words != vocab.words:
            raise MissingArtifactError(
                f"{path} was trained on a different vocabulary"
            )
        spaces.append(space.normalized_copy())
    return spaces


def cmd_detect(config: RunConfig) -> int:
    corpus = _load_corpus(config)
    vocab = build_common_vocabulary(corpus, config.min_count)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = {}

    spaces = None
    if series_mod.DISTRIBUTIONAL in config.method:
        if config.end_to_end:
            spaces = _train_into(config, corpus, vocab, out_dir, artifacts)
        else:
            spaces = _load_spaces(config, corpus, vocab, out_dir)

    detector = config.detector_config()
    for method in config.method:
        if method == series_mod.FREQUENCY:
            ensemble = series_mod.frequency_ensemble(vocab, corpus)
        elif method == series_mod.SYNTACTIC:
            if not config.tagged:
                raise UsageError("the syntactic method requires --tagged input")
            ensemble = series_mod.syntactic_ensemble(corpus, vocab)
        else:
            k = config.k or default_neighborhood(spaces[0].dim, len(vocab))
            maps = align_all_to_base(spaces, k=k, ridge=config.ridge)
            if config.dump_residuals:
                res_path = out_dir / "alignment_residuals.csv"
                write_residuals_csv(maps, vocab.words, res_path)
                artifacts["alignment_residuals"] = res_path
            ensemble = series_mod.distributional_ensemble(spaces, maps, vocab.words)

        series_path = out_dir / f"series_{method}.csv"
        series_mod.write_series_csv([ensemble], corpus.labels, series_path)
        artifacts[f"series:{method}"] = series_path

        normalized = normalize_ensemble(ensemble)
        results = detect_ensemble(normalized, detector, labels=corpus.labels)
        report_path = out_dir / f"report_{method}.csv"
        write_report_csv(results, method, report_path)
        artifacts[f"report:{method}"] = report_path
        hits = sum(r.significant for r in results)
        print(f"{method}: {hits} significant word(s) of {len(vocab)}")

    write_run_manifest(out_dir, artifacts)
    return EXIT_OK


def cmd_bench(config: RunConfig) -> int:
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = {}

    stop_list = frozenset()
    if config.base_corpus:
        base_path = Path(config.base_corpus)
        if config.stopwords:
            stop_list = frozenset(read_stopword_file(config.stopwords))
    else:
        base_path = out_dir / "bench_base_corpus.txt"
        gen = GeneratorConfig(tokens=config.gen_tokens, seed=config.seed)
        function_words = generate_corpus(base_path, gen)
        stop_path = out_dir / "bench_stopwords.txt"
        write_stopword_file(stop_path, function_words)
        stop_list = frozenset(function_words)
        artifacts["bench_base_corpus"] = base_path
        artifacts["bench_stopwords"] = stop_path

    base = load_snapshot(base_path, format=TAGGED if config.tagged else PLAIN,
                         label="base", lowercase=config.lowercase)
    results = run_bench(
        base,
        snapshots=config.snapshots,
        p_grid=config.p_grid,
        n_pairs=config.pairs,
        methods=config.method,
        training=config.training_config(),
        detector=config.detector_config(),
        min_count=config.min_count,
        k=config.k,
        ridge=config.ridge,
        stopwords=stop_list,
        same_pos=config.same_pos,
        seed=config.seed,
    )
    report = out_dir / "bench_report.csv"
    write_bench_csv(results, report)
    artifacts["bench_report"] = report
    write_run_manifest(out_dir, artifacts)
    for res in results:
        print(f"{res.method} p={res.p_replacement}: MRR={res.mrr:.4f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _Parser(prog="wordshift",
                     description="statistically tested word-usage shift detection")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("train", cmd_train), ("detect", cmd_detect), ("bench", cmd_bench)):
        p = sub.add_parser(name, add_help=True)
        _add_common_flags(p)
        p.set_defaults(func=fn)

    try:
        args = parser.parse_args(argv)
        config = build_config(args)
        return args.func(config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except (OSError, CorpusFormatError, EmptyVocabularyError, MissingWordError,
            TrainingDivergedError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def console_entry():
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
