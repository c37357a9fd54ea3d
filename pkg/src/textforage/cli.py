"""Batch pipeline driver.

Subcommands chain file artifacts through an output directory:

    prepare -> corpus.json
    train   -> model_k{K}.json            (one per configured k)
    measure -> series_k{K}_{mode}.csv
    null    -> null_k{K}_*.csv/.json      (needs measure's series)
    epochs  -> epochs_k{K}_{mode}.json    (needs measure's series)
    fit     -> fit_{name}_k{K}_*.csv/.json
    compare -> compare_k{A}_vs_k{B}.csv/.json
    pipeline runs all of the above in order
    fixture writes a synthetic corpus + config for smoke testing

Every artifact embeds the tool version, the SHA-256 of the resolved
configuration, and the master seed, so identical (config, seed) runs
are byte-identical.  Exit codes: 0 success, 1 configuration error,
2 missing upstream artifact, 3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, epochs, lda, modelcompare, nullmodels, querysample
from .corpus import (
    Corpus,
    FilterConfig,
    TokenizerConfig,
    build_vocabulary,
    encode_corpus,
    load_manifest,
    tokenize,
)
from .errors import ConfigError, MissingArtifactError, NumericalDegeneracyError
from .measures import surprise_series
from .nullmodels import ReadingOrder
from .seeds import derive_seed
from .synthetic import make_fixture

SUBCOMMANDS = (
    "prepare", "train", "measure", "null", "epochs", "fit", "compare", "pipeline", "fixture",
)

_DEFAULTS = {
    "threads": 1,
    "filter": {"min_count": None, "max_count": None, "top_mass": None,
               "bottom_mass": None, "stopwords": []},
    "tokenizer": {"merge_hyphens": True, "ascii_fold": True},
    # paper-reported settings: symmetric priors 0.1/0.01, 500 sweeps,
    # coarse and fine topic counts, 1000 null permutations
    "training": {"ks": [80, 200], "alpha": 0.1, "beta": 0.01,
                 "iterations": 500, "hogwild_shards": None},
    "measure": {"modes": ["t2t", "t2p"], "smoothing": True},
    "null_model": {"permutations": 1000},
    "epochs": {"max_epochs": 3, "min_len": 10, "variance_mode": "mle"},
    "fit": {"documents": [], "iterations": 100, "samples": 100,
            "phi_mode": "drifting", "cluster_range": [2, 10]},
    "compare": {"merge": "expand_epsilon", "strategy": "basic"},
}


# ---------------------------------------------------------------------------
# Configuration


def _require(cfg: dict, path: str, kind, where: str):
    value = cfg
    for part in path.split("."):
        if not isinstance(value, dict) or part not in value:
            raise ConfigError(f"{where}: missing required field '{path}'")
        value = value[part]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{where}: field '{path}' has wrong type "
                          f"(expected {getattr(kind, '__name__', kind)})")
    return value


def load_config(path: str | Path, overrides: dict | None = None) -> dict:
    """Read, default-fill, and validate the pipeline configuration.

    Relative paths inside the file resolve against the file's own
    directory.  `overrides` (from --seed/--out/--threads flags) are
    applied before validation and become part of the config hash.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    cfg = {}
    for key, default in _DEFAULTS.items():
        if not isinstance(default, dict):
            cfg[key] = raw.get(key, default)
            continue
        merged = dict(default)
        user = raw.get(key, {})
        if user is None:
            user = {}
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: field '{key}' must be a mapping")
        unknown = set(user) - set(default)
        if unknown:
            raise ConfigError(f"{path}: unknown field '{key}.{sorted(unknown)[0]}'")
        merged.update(user)
        cfg[key] = merged
    for key in ("manifest", "output_dir", "seed"):
        if key in raw:
            cfg[key] = raw[key]
    unknown = set(raw) - set(_DEFAULTS) - {"manifest", "output_dir", "seed"}
    if unknown:
        raise ConfigError(f"{path}: unknown field '{sorted(unknown)[0]}'")

    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value

    where = str(path)
    _require(cfg, "manifest", str, where)
    _require(cfg, "output_dir", str, where)
    seed = _require(cfg, "seed", int, where)
    if isinstance(seed, bool):
        raise ConfigError(f"{where}: field 'seed' must be an integer")
    ks = _require(cfg, "training.ks", list, where)
    if not ks or not all(isinstance(k, int) and k >= 2 for k in ks):
        raise ConfigError(f"{where}: field 'training.ks' must list integers >= 2")
    if len(set(ks)) != len(ks):
        raise ConfigError(f"{where}: field 'training.ks' has duplicates")
    for field, kind in (
        ("training.alpha", (int, float)), ("training.beta", (int, float)),
        ("training.iterations", int), ("null_model.permutations", int),
        ("epochs.max_epochs", int), ("epochs.min_len", int),
        ("fit.iterations", int), ("fit.samples", int), ("threads", int),
    ):
        _require(cfg, field, kind, where)
    if cfg["epochs"]["variance_mode"] not in epochs.VARIANCE_MODES:
        raise ConfigError(f"{where}: field 'epochs.variance_mode' must be one of "
                          f"{epochs.VARIANCE_MODES}")
    if cfg["fit"]["phi_mode"] not in querysample.PHI_MODES:
        raise ConfigError(f"{where}: field 'fit.phi_mode' must be one of "
                          f"{querysample.PHI_MODES}")
    for field in ("measure.modes",):
        modes = _require(cfg, field, list, where)
        bad = [m for m in modes if m not in ("t2t", "t2p")]
        if bad:
            raise ConfigError(f"{where}: field '{field}' has unknown mode {bad[0]!r}")
    for field, minimum in (
        ("training.iterations", 0), ("null_model.permutations", 1),
        ("epochs.max_epochs", 1), ("epochs.min_len", 2),
        ("fit.iterations", 0), ("fit.samples", 1),
    ):
        if cfg[field.split(".")[0]][field.split(".")[1]] < minimum:
            raise ConfigError(f"{where}: field '{field}' must be >= {minimum}")
    span = cfg["fit"]["cluster_range"]
    if (not isinstance(span, list) or len(span) != 2
            or not all(isinstance(x, int) for x in span)
            or not 2 <= span[0] <= span[1]):
        raise ConfigError(f"{where}: field 'fit.cluster_range' must be [lo, hi] "
                          "with 2 <= lo <= hi")

    base = path.parent
    cfg["manifest"] = str((base / cfg["manifest"]).resolve()
                          if not Path(cfg["manifest"]).is_absolute() else Path(cfg["manifest"]))
    out_dir = Path(cfg["output_dir"])
    cfg["output_dir"] = str((base / out_dir) if not out_dir.is_absolute() else out_dir)
    cfg["fit"]["documents"] = [
        str((base / p) if not Path(p).is_absolute() else Path(p))
        for p in cfg["fit"]["documents"]
    ]
    return cfg


def config_hash(cfg: dict) -> str:
    """Hash of the semantic configuration.

    Excludes output_dir and threads: neither affects any computed
    value, so runs into different directories (or with different
    worker counts) still produce byte-identical artifacts.
    """
    semantic = {k: v for k, v in cfg.items() if k not in ("output_dir", "threads")}
    canon = json.dumps(semantic, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class _Run:
    """Shared state for one invocation: resolved config and metadata."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.out = Path(cfg["output_dir"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.hash = config_hash(cfg)
        self.seed = cfg["seed"]

    @property
    def metadata_lines(self) -> list[str]:
        return [
            f"textforage={__version__} format=1",
            f"config_sha256={self.hash}",
            f"seed={self.seed}",
        ]

    def metadata_dict(self) -> dict:
        return {
            "textforage": __version__,
            "format": 1,
            "config_sha256": self.hash,
            "seed": self.seed,
        }

    def write_json(self, name: str, payload: dict) -> None:
        body = {"metadata": self.metadata_dict(), **payload}
        (self.out / name).write_text(
            json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def artifact(self, name: str, producer: str) -> Path:
        path = self.out / name
        if not path.is_file():
            raise MissingArtifactError(
                f"missing artifact {name}: run `{producer}` first"
            )
        return path


# ---------------------------------------------------------------------------
# Stages


def stage_prepare(run: _Run) -> None:
    cfg = run.cfg
    manifest = Path(cfg["manifest"])
    if not manifest.is_file():
        raise ConfigError(f"manifest: file not found: {manifest}")
    specs = load_manifest(manifest)
    tok_cfg = TokenizerConfig(**cfg["tokenizer"])
    token_docs = [tokenize(s.load_text(manifest.parent), tok_cfg) for s in specs]
    filt = FilterConfig(
        min_count=cfg["filter"]["min_count"],
        max_count=cfg["filter"]["max_count"],
        top_mass=cfg["filter"]["top_mass"],
        bottom_mass=cfg["filter"]["bottom_mass"],
        stopwords=frozenset(cfg["filter"]["stopwords"]),
    )
    vocabulary = build_vocabulary(token_docs, filt)
    corpus = encode_corpus(specs, token_docs, vocabulary)
    for warning in corpus.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    for doc_id in corpus.skipped_empty:
        print(f"warning: {doc_id}: empty after encoding; excluded", file=sys.stderr)
    corpus.save(run.out / "corpus.json", metadata=run.metadata_dict())
    run.write_json(
        "prepare_summary.json",
        {
            "documents": corpus.n_documents,
            "vocabulary_size": len(vocabulary),
            "total_tokens": corpus.total_tokens(),
            "skipped_empty": list(corpus.skipped_empty),
            "date_warnings": list(corpus.warnings),
        },
    )
    print(f"prepared corpus: {corpus.n_documents} documents, "
          f"V={len(vocabulary)}, {corpus.total_tokens()} tokens")


def _load_corpus(run: _Run) -> Corpus:
    return Corpus.load(run.artifact("corpus.json", "prepare"))


def _load_model(run: _Run, k: int, corpus: Corpus) -> lda.TopicModel:
    path = run.artifact(f"model_k{k}.json", "train")
    return lda.TopicModel.load(path, corpus.vocabulary)


def stage_train(run: _Run) -> None:
    cfg = run.cfg
    corpus = _load_corpus(run)
    for i, k in enumerate(cfg["training"]["ks"]):
        config = lda.TrainingConfig(
            k=k,
            seed=derive_seed(run.seed, i, "train"),
            alpha=cfg["training"]["alpha"],
            beta=cfg["training"]["beta"],
            iterations=cfg["training"]["iterations"],
        )
        model = lda.train(
            corpus,
            config,
            hogwild_shards=cfg["training"]["hogwild_shards"],
            threads=cfg["threads"],
        )
        model.check_invariants()
        model.save(run.out / f"model_k{k}.json", metadata=run.metadata_dict())
        print(f"trained k={k}: final log joint "
              f"{model.log_likelihood_trace[-1]:.2f}" if model.log_likelihood_trace
              else f"trained k={k} (0 sweeps)")


def stage_measure(run: _Run) -> None:
    cfg = run.cfg
    corpus = _load_corpus(run)
    item_ids = [d.spec.id for d in corpus.in_reading_order()]
    for k in cfg["training"]["ks"]:
        model = _load_model(run, k, corpus)
        theta, _ = lda.estimate_distributions(model, smoothing=cfg["measure"]["smoothing"])
        for mode in cfg["measure"]["modes"]:
            series = surprise_series(theta, mode=mode, item_ids=item_ids)
            series.to_csv(run.out / f"series_k{k}_{mode}.csv", metadata=run.metadata_lines)
        print(f"measured k={k}: {len(item_ids) - 1} steps per mode")


def _read_series_csv(path: Path) -> np.ndarray:
    values = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("position,"):
                continue
            parts = line.strip().split(",")
            if parts and parts[0]:
                values.append(float(parts[3]))
    return np.asarray(values)


def stage_null(run: _Run) -> None:
    cfg = run.cfg
    corpus = _load_corpus(run)
    order = ReadingOrder.from_corpus(corpus)
    item_ids = list(order.item_ids)
    n = cfg["null_model"]["permutations"]
    for k in cfg["training"]["ks"]:
        for mode in cfg["measure"]["modes"]:
            run.artifact(f"series_k{k}_{mode}.csv", "measure")
        model = _load_model(run, k, corpus)
        theta, _ = lda.estimate_distributions(model, smoothing=True)
        comparison = nullmodels.null_ensemble(
            order, theta, n=n, seed=derive_seed(run.seed, k, "null"),
            modes=tuple(cfg["measure"]["modes"]),
        )
        nullmodels.ensemble_means_to_csv(
            comparison, run.out / f"null_k{k}_means.csv", metadata=run.metadata_lines
        )
        for mode in cfg["measure"]["modes"]:
            nullmodels.cumulative_relative_to_csv(
                comparison, mode, run.out / f"null_k{k}_cumrel_{mode}.csv",
                item_ids=item_ids, metadata=run.metadata_lines,
            )
        summary = comparison.summary_payload()
        for objective in cfg["measure"]["modes"]:
            path = nullmodels.greedy_shortest_path(theta, start=0, objective=objective)
            values = nullmodels._SERIES_FN[objective](theta[path])
            summary[objective]["greedy_mean_bits"] = float(values.mean())
        run.write_json(f"null_k{k}_summary.json", {"modes": summary})
        ranks = nullmodels.rank_distribution(
            theta, np.arange(len(order)), comparison.ensemble.permutations
        )
        run.write_json(f"null_k{k}_ranks.json", ranks.to_payload())
        shown = {m: round(v, 5) for m, v in comparison.p_value.items()}
        print(f"null k={k}: p-values {shown} over {n} permutations")


def stage_epochs(run: _Run) -> None:
    cfg = run.cfg
    corpus = _load_corpus(run)
    docs = corpus.in_reading_order()
    labels = [str(d.spec.read_date) if d.spec.read_date else str(i)
              for i, d in enumerate(docs)][1:]
    for k in cfg["training"]["ks"]:
        for mode in cfg["measure"]["modes"]:
            path = run.artifact(f"series_k{k}_{mode}.csv", "measure")
            values = _read_series_csv(path)
            try:
                scores = epochs.select_model(
                    values,
                    max_epochs=cfg["epochs"]["max_epochs"],
                    min_len=cfg["epochs"]["min_len"],
                    variance_mode=cfg["epochs"]["variance_mode"],
                )
            except ValueError as exc:
                raise ConfigError(
                    f"epochs.min_len/max_epochs: {exc} (series has {values.size} steps)"
                ) from exc
            report = epochs.epoch_report(scores, position_labels=labels)
            run.write_json(f"epochs_k{k}_{mode}.json", report)
            best = epochs.best_model(scores)
            print(f"epochs k={k} {mode}: best n={best.model.n_epochs} "
                  f"breaks={list(best.model.interior_boundaries)}")


def stage_fit(run: _Run) -> None:
    cfg = run.cfg
    if not cfg["fit"]["documents"]:
        print("fit: no documents configured; skipping")
        return
    corpus = _load_corpus(run)
    k = cfg["training"]["ks"][0]
    model = _load_model(run, k, corpus)
    tok_cfg = TokenizerConfig(**cfg["tokenizer"])
    lo, hi = cfg["fit"]["cluster_range"]
    for doc_path in cfg["fit"]["documents"]:
        path = Path(doc_path)
        if not path.is_file():
            raise ConfigError(f"fit.documents: file not found: {path}")
        tokens = tokenize(path.read_text(encoding="utf-8"), tok_cfg)
        name = path.stem
        ensemble = querysample.sample_ensemble(
            model,
            tokens,
            n_samples=cfg["fit"]["samples"],
            iterations=cfg["fit"]["iterations"],
            phi_mode=cfg["fit"]["phi_mode"],
            master_seed=derive_seed(run.seed, k, f"fit:{name}"),
            doc_id=name,
            workers=cfg["threads"],
        )
        querysample.ensemble_to_csv(
            ensemble, run.out / f"fit_{name}_k{k}_samples.csv",
            metadata=run.metadata_lines,
        )
        report = querysample.cluster_ensemble(ensemble, k_range=range(lo, hi + 1))
        run.write_json(f"fit_{name}_k{k}_clusters.json", report.to_payload())
        run.write_json(
            f"fit_{name}_k{k}.json",
            {
                "doc_id": name,
                "phi_mode": ensemble.phi_mode,
                "n_samples": ensemble.n_samples,
                "mean_theta": [float(x) for x in ensemble.mean_theta()],
                "mean_perplexity": float(ensemble.perplexities.mean()),
            },
        )
        print(f"fit {name}: {ensemble.n_samples} samples, "
              f"{report.n_clusters} interpretation clusters")


def stage_compare(run: _Run) -> None:
    cfg = run.cfg
    ks = cfg["training"]["ks"]
    if len(ks) < 2:
        raise ConfigError("training.ks: compare needs at least two trained models")
    corpus = _load_corpus(run)
    terms = list(corpus.vocabulary.id_to_term)
    for k_a, k_b in zip(ks, ks[1:]):
        if k_a > k_b:
            k_a, k_b = k_b, k_a
        model_a = _load_model(run, k_a, corpus)
        model_b = _load_model(run, k_b, corpus)
        _, phi_a = lda.estimate_distributions(model_a, smoothing=True)
        _, phi_b = lda.estimate_distributions(model_b, smoothing=True)
        merged_a, merged_b, _ = modelcompare.merge_vocabulary(
            phi_a, terms, phi_b, terms, strategy=cfg["compare"]["merge"]
        )
        alignment = modelcompare.align_topics(
            merged_a, merged_b,
            strategy=cfg["compare"]["strategy"],
            seed=derive_seed(run.seed, k_a * 100003 + k_b, "compare"),
        )
        mean, total = modelcompare.model_distance(alignment)
        modelcompare.alignment_to_csv(
            alignment, run.out / f"compare_k{k_a}_vs_k{k_b}.csv",
            metadata=run.metadata_lines,
        )
        run.write_json(
            f"compare_k{k_a}_vs_k{k_b}.json",
            {
                "k_a": k_a, "k_b": k_b,
                "merge": cfg["compare"]["merge"],
                "strategy": alignment.strategy,
                "mean_distance": mean,
                "total_distance": total,
                "injective": alignment.is_injective,
            },
        )
        print(f"compared k={k_a} vs k={k_b}: mean JS distance {mean:.4f}")


_STAGES = {
    "prepare": stage_prepare,
    "train": stage_train,
    "measure": stage_measure,
    "null": stage_null,
    "epochs": stage_epochs,
    "fit": stage_fit,
    "compare": stage_compare,
}


def stage_pipeline(run: _Run) -> None:
    order = ["prepare", "train", "measure", "null", "epochs"]
    if run.cfg["fit"]["documents"]:
        order.append("fit")
    if len(run.cfg["training"]["ks"]) >= 2:
        order.append("compare")
    for name in order:
        _STAGES[name](run)


def stage_fixture(args) -> None:
    out = Path(args.out or "fixture")
    summary = make_fixture(out, seed=args.seed if args.seed is not None else 7)
    config = {
        "manifest": "manifest.jsonl",
        "output_dir": "out",
        "seed": 11,
        "filter": {"min_count": 2},
        "training": {"ks": [4, 6], "iterations": 150},
        "null_model": {"permutations": 200},
        "epochs": {"max_epochs": 2, "min_len": 5},
        "fit": {"documents": [Path(p).name for p in summary["query_paths"]],
                "samples": 40, "iterations": 50, "cluster_range": [2, 6]},
    }
    (out / "config.yaml").write_text(yaml.safe_dump(config, sort_keys=True), encoding="utf-8")
    print(f"fixture written to {out} (planted break at position "
          f"{summary['planted_break']}); config: {out / 'config.yaml'}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="textforage",
        description="Information foraging analysis of reading histories.",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="pipeline configuration file (YAML)")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--threads", type=int, default=None, help="cap worker threads")
    parser.add_argument("--out", default=None, help="override the output directory")
    args = parser.parse_args(argv)

    try:
        if args.subcommand == "fixture":
            stage_fixture(args)
            return 0
        if not args.config:
            raise ConfigError("--config is required for this subcommand")
        cfg = load_config(
            args.config,
            overrides={"seed": args.seed, "threads": args.threads, "output_dir": args.out},
        )
        run = _Run(cfg)
        if args.subcommand == "pipeline":
            stage_pipeline(run)
        else:
            _STAGES[args.subcommand](run)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except MissingArtifactError as exc:
        print(f"missing dependency: {exc}", file=sys.stderr)
        return 2
    except NumericalDegeneracyError as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
