"""``herbgraph`` command line: one verb per pipeline stage, artifacts in a run directory.

Every verb reads a TOML (or JSON) config plus flags, checks that its
prerequisite artifacts exist, writes its outputs atomically and records a
manifest entry with the config hash and input/output hashes. Exit codes:
0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import os
import platform
import shutil
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .embed.io import atomic_write_bytes, dumps_json

log = logging.getLogger("herbgraph")

MANIFEST = "manifest.json"
KG_DIR = "kg"
FEATURES = "features.bin"
GRAPHS = "graphs.jsonl"
CHECKPOINT = "model.ckpt"
SPLITS = "splits.json"
EVAL_METRICS = "eval_metrics.csv"

# Top-level keys and per-verb blocks with their defaults. ``None`` marks an
# optional key with no default (TOML has no null, so such keys are simply left out).
DEFAULTS: dict = {
    "data_dir": None,
    "output_dir": "run",
    "seed": None,
    "precision": "f32",
    "threads": 1,
    "fixture": None,
    "fixture_formulas": 300,
    "ingest": {"schema": None},
    "embed": {"pca_method": "rows", "skipgram_epochs": None},
    "diffuse": {"k": 10, "metric": "cosine", "reduce_dims": None, "depth": 1, "druglike": True,
                "coverage_thresholds": [5.0, 6.0, 7.0, 8.0, 9.0]},
    "encode": {},
    "train": {"arch": "GAT", "hidden_dim": 64, "num_heads": 4, "dropout_rate": 0.5, "readout": "chp",
              "learning_rate": 1e-4, "batch_size": 32, "epochs": 200, "weight_decay": 0.0,
              "split": [7, 2, 1]},
    "tune": {"arch": "GAT", "folds": 5, "epochs": 200, "stage1": None, "stage2": None},
    "eval": {"splits": ["test"], "decision_threshold": 0.5},
    "predict": {},
    "explain": {"split": "test"},
    "analyze": {"louvain_restarts": 8, "layout_iterations": 500, "n_clusters": 6, "linkage": "ward",
                "term_dim": 32, "affinity_threshold": 8.0, "herb": None, "q_threshold": 0.05,
                "network_pathways": "enriched"},
    "project2d": {},
    "report": {"runs": []},
}
VERBS = ("ingest", "embed", "diffuse", "encode", "train", "tune", "eval", "predict", "explain", "analyze",
         "project2d", "report", "verify")
# Keys that name locations rather than content; left out of the config hash.
_PATH_KEYS = ("data_dir", "output_dir")


class UsageError(Exception):
    """Bad flags or config (exit code 2)."""


# --- config --------------------------------------------------------------------


def _read_config_file(path: Path) -> dict:
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".json":
            return json.loads(text)
        from ._toml import loads as toml_loads

        return toml_loads(text)
    except ValueError as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from exc


def _check_keys(data: dict, defaults: dict, where: str) -> None:
    for key, value in data.items():
        if key not in defaults:
            raise UsageError(f"unknown config key '{where}{key}'")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise UsageError(f"config key {where}{key!r} must be a table")
            _check_keys(value, defaults[key], f"{where}{key}.")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_value(text: str):
    from ._toml import loads as toml_loads

    try:
        return toml_loads(f"v = {text}")["v"]
    except ValueError:
        return text


def _set_path(data: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise UsageError(f"--set {dotted}: {p!r} is not a table")
    node[parts[-1]] = value


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags. Rejects unknown keys; requires a seed."""
    given: dict = {}
    if args.config:
        given = _read_config_file(Path(args.config))
    overrides: dict = {}
    for flag, key in (("data_dir", "data_dir"), ("output_dir", "output_dir"), ("seed", "seed"),
                      ("fixture", "fixture"), ("threads", "threads"), ("precision", "precision"),
                      ("fixture_formulas", "fixture_formulas")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        _set_path(overrides, key.strip(), _parse_value(value.strip()))
    _check_keys(given, DEFAULTS, "")
    _check_keys(overrides, DEFAULTS, "")
    cfg = _merge(_merge(DEFAULTS, given), overrides)
    if cfg["seed"] is None:
        raise UsageError("a seed is required (config key 'seed' or --seed)")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise UsageError("seed must be an integer")
    if cfg["precision"] not in ("f32", "f64"):
        raise UsageError("precision must be 'f32' or 'f64'")
    if cfg["fixture"] not in (None, "planted"):
        raise UsageError(f"unknown fixture {cfg['fixture']!r}; only 'planted' is bundled")
    if not isinstance(cfg["threads"], int) or cfg["threads"] < 1:
        raise UsageError("threads must be a positive integer")
    return cfg


def config_hash(cfg: dict, verb: str) -> str:
    """Hash of the settings a verb depends on: global keys (paths excluded) plus its own block."""
    relevant = {k: v for k, v in cfg.items() if not isinstance(DEFAULTS.get(k), dict) and k not in _PATH_KEYS}
    relevant[verb] = cfg.get(verb, {})
    return hashlib.sha256(json.dumps(relevant, sort_keys=True).encode()).hexdigest()


# --- hashing and manifest --------------------------------------------------------


def file_hash(path: Path) -> str:
    h = hashlib.sha256()
    if path.is_dir():
        for p in sorted(q for q in path.rglob("*") if q.is_file()):
            h.update(p.relative_to(path).as_posix().encode() + b"\0")
            h.update(file_hash(p).encode())
        return h.hexdigest()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions() -> dict:
    import networkx
    import scipy
    import torch

    return {"herbgraph": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "networkx": networkx.__version__, "torch": torch.__version__}


def read_manifest(run: Path) -> dict:
    p = run / MANIFEST
    if not p.exists():
        return {"entries": []}
    return json.loads(p.read_text(encoding="utf-8"))


def _record(run: Path, entry: dict) -> None:
    man = read_manifest(run)
    entries = [e for e in man["entries"] if e["verb"] != entry["verb"]]
    pos = next((i for i, e in enumerate(man["entries"]) if e["verb"] == entry["verb"]), len(entries))
    entries.insert(pos, entry)
    man["entries"] = entries
    atomic_write_bytes(run / MANIFEST, dumps_json(man).encode())


def verify_manifest(run: Path) -> list[str]:
    """Problems in the hash chain: artifacts edited after being recorded, or consumed
    by a verb at a different version than the one its producer recorded."""
    if not (run / MANIFEST).exists():
        return [f"no {MANIFEST} in {run}"]
    problems = []
    produced: dict[str, tuple[str, str]] = {}
    for e in read_manifest(run)["entries"]:
        for name, h in e["inputs"].items():
            if name in produced and produced[name][1] != h:
                problems.append(f"{e['verb']}: input {name} differs from the {produced[name][0]} output")
            p = run / name
            if not name.startswith("data:") and p.exists() and file_hash(p) != h:
                problems.append(f"{e['verb']}: input {name} changed since it was consumed")
        for name, h in e["outputs"].items():
            produced[name] = (e["verb"], h)
            p = run / name
            if not p.exists():
                problems.append(f"{e['verb']}: output {name} is missing")
            elif file_hash(p) != h:
                problems.append(f"{e['verb']}: output {name} changed since it was written")
    return problems


# --- run context -----------------------------------------------------------------


@dataclass
class Context:
    verb: str
    cfg: dict
    run: Path
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return int(self.cfg["seed"])

    @property
    def opts(self) -> dict:
        return self.cfg.get(self.verb, {})

    def need(self, *names: str) -> None:
        """Check prerequisites in order; the first absent one is reported."""
        from .errors import MissingPrerequisite

        for name in names:
            if not (self.run / name).exists():
                raise MissingPrerequisite(name)
        for name in names:
            self.inputs[name] = file_hash(self.run / name)

    def path(self, name: str) -> Path:
        return self.run / name

    def write_bytes(self, name: str, data: bytes) -> None:
        atomic_write_bytes(self.run / name, data)
        self.outputs[name] = file_hash(self.run / name)

    def write_text(self, name: str, text: str) -> None:
        self.write_bytes(name, text.encode("utf-8"))

    def wrote(self, name: str) -> None:
        """Register an artifact produced through a module's own writer."""
        self.outputs[name] = file_hash(self.run / name)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _load_kg(ctx: Context):
    from .kg import load_knowledge_graph

    ctx.need(KG_DIR)
    return load_knowledge_graph(ctx.path(KG_DIR))


def _load_splits(ctx: Context, graphs):
    ids = json.loads(ctx.path(SPLITS).read_text(encoding="utf-8"))
    by_id = {g.formula_id: g for g in graphs}
    return {name: [by_id[i] for i in ids[name]] for name in ("train", "val", "test")}


def _load_model(ctx: Context):
    from .gnn.checkpoint import load_checkpoint

    model, _ = load_checkpoint(ctx.path(CHECKPOINT))
    return model


# --- verbs ---------------------------------------------------------------------


def verb_ingest(ctx: Context) -> None:
    from .kg import SchemaConfig, formula_stats, load_knowledge_graph, validate, write_knowledge_graph

    if ctx.cfg["fixture"] == "planted":
        from .fixtures import planted_knowledge_graph

        kg = planted_knowledge_graph(int(ctx.cfg["fixture_formulas"]), seed=ctx.seed)
    else:
        if not ctx.cfg["data_dir"]:
            raise UsageError("ingest needs data_dir (or --fixture planted)")
        data = Path(ctx.cfg["data_dir"])
        schema = SchemaConfig.from_file(ctx.opts["schema"]) if ctx.opts.get("schema") else SchemaConfig()
        kg = load_knowledge_graph(data, schema)
        for p in sorted(q for q in data.rglob("*") if q.is_file()):
            ctx.inputs["data:" + p.relative_to(data).as_posix()] = file_hash(p)
    tmp, old, final = ctx.path(KG_DIR + ".tmp"), ctx.path(KG_DIR + ".old"), ctx.path(KG_DIR)
    shutil.rmtree(tmp, ignore_errors=True)
    write_knowledge_graph(kg, tmp)
    if final.exists():
        shutil.rmtree(old, ignore_errors=True)
        os.replace(final, old)
    os.replace(tmp, final)
    shutil.rmtree(old, ignore_errors=True)
    ctx.wrote(KG_DIR)

    issues = validate(kg)
    stats = {"n_herbs": len(kg.herbs), "n_formulas": len(kg.formulas), "n_compounds": len(kg.compounds),
             "n_pairs": len(kg.pairs), "issues": sorted(f"{i.code}:{i.table}:{i.key}" for i in issues.issues)}
    try:
        fs = formula_stats(kg)
        stats.update(mean_members=fs.mean_members, mean_dose_ratio=fs.mean_dose_ratio,
                     members_histogram={str(k): v for k, v in fs.members_histogram.items()},
                     n_dosed_formulas=fs.n_dosed_formulas)
    except Exception as exc:  # corpus without doses: statistics are informative only
        stats["dose_stats_error"] = str(exc)
    if issues:
        log.warning("%d validation issue(s); see stats.json", len(issues))
    ctx.write_text("stats.json", dumps_json(stats))


def verb_embed(ctx: Context) -> None:
    from dataclasses import replace

    from .embed.features import DEFAULT_SKIPGRAM, embed_herbs

    kg = _load_kg(ctx)
    configs = dict(DEFAULT_SKIPGRAM)
    if ctx.opts.get("skipgram_epochs") is not None:
        configs = {k: replace(v, epochs=int(ctx.opts["skipgram_epochs"])) for k, v in configs.items()}
    feats, _, origin = embed_herbs(kg, seed=ctx.seed, configs=configs, pca_method=ctx.opts["pca_method"])
    feats.save(ctx.path(FEATURES), dtype=ctx.cfg["precision"])
    ctx.wrote(FEATURES)
    ctx.wrote(FEATURES + ".json")
    ctx.write_text("origin_pca.json", dumps_json({"explained": {k: [float(x) for x in v]
                                                                for k, v in sorted(origin.explained.items())}}))


def verb_diffuse(ctx: Context) -> None:
    from .diffuse import DiffusionConfig, coverage_report, diffuse_pairs, filter_druglike, knn_neighbors

    kg = _load_kg(ctx)
    o = ctx.opts
    if kg.compound_features is None:
        from .errors import TooFewCompounds

        raise TooFewCompounds("no compound feature matrix was ingested")
    dcfg = DiffusionConfig(k=int(o["k"]), metric=o["metric"], reduce_dims=o.get("reduce_dims"), depth=int(o["depth"]))
    ids = list(kg.compound_features.row_index)
    keep = set(filter_druglike(kg.compounds.values())) if o["druglike"] else set(ids)
    rows = [i for i, c in enumerate(ids) if c in keep]
    sel = [ids[i] for i in rows]
    idx = knn_neighbors(sel, kg.compound_features.values[rows], dcfg)
    known = [p for p in kg.pairs if p.inchikey in keep]
    cands = diffuse_pairs(known, idx, depth=dcfg.depth)
    ctx.write_text("candidates.csv", _csv(("inchikey", "entrez_id", "provenance"),
                                          [(p.inchikey, p.entrez_id, p.provenance.value) for p in cands]))
    scored = [p for p in kg.pairs if p.affinity is not None]
    targets = {p.entrez_id for p in kg.pairs}
    if scored and targets:
        cov = coverage_report(scored, ids, targets, [float(t) for t in o["coverage_thresholds"]])
        ctx.write_text("coverage.csv", _csv(cov[0].CSV_COLUMNS, [r.csv_row() for r in cov]))


def verb_encode(ctx: Context) -> None:
    from .embed.features import FeatureMatrix
    from .formula_graph import encode_all, write_graphs

    kg = _load_kg(ctx)
    ctx.need(FEATURES)
    feats = FeatureMatrix.load(ctx.path(FEATURES))
    write_graphs(ctx.path(GRAPHS), encode_all(kg.formulas.values(), feats, kg))
    ctx.wrote(GRAPHS)


def _model_config(o: dict):
    from .gnn.models import ModelConfig

    return ModelConfig(arch=o["arch"], hidden_dim=int(o["hidden_dim"]), num_heads=int(o["num_heads"]),
                       dropout_rate=float(o["dropout_rate"]), readout=o["readout"])


def _split(graphs, ratio, seed):
    from .gnn.training import ratio_counts, split_dataset

    counts = tuple(int(c) for c in ratio)
    if sum(counts) != len(graphs):
        counts = ratio_counts(len(graphs), counts)
    return split_dataset(graphs, counts, seed)


def verb_train(ctx: Context) -> None:
    from .formula_graph import read_graphs
    from .gnn.checkpoint import save_checkpoint
    from .gnn.training import TrainConfig, train

    ctx.need(GRAPHS)
    o = ctx.opts
    graphs = read_graphs(ctx.path(GRAPHS))
    splits = _split(graphs, o["split"], ctx.seed)
    mcfg = _model_config(o)
    tcfg = TrainConfig(learning_rate=float(o["learning_rate"]), batch_size=int(o["batch_size"]),
                       epochs=int(o["epochs"]), seed=ctx.seed, weight_decay=float(o["weight_decay"]),
                       precision=ctx.cfg["precision"])
    model, hist = train(splits, mcfg, tcfg)
    ctx.write_text(SPLITS, dumps_json({name: [g.formula_id for g in part] for name, part in splits.items()}))
    save_checkpoint(ctx.path(CHECKPOINT), model, ctx.seed, extra={"train": tcfg.to_dict(),
                                                                   "best_epoch": hist.best_epoch})
    ctx.wrote(CHECKPOINT)
    ctx.write_text("history.csv", hist.to_csv())


def verb_tune(ctx: Context) -> None:
    from .formula_graph import read_graphs
    from .gnn.training import TrainConfig, default_grids, grid_search

    ctx.need(GRAPHS)
    o, t = ctx.opts, ctx.cfg["train"]
    graphs = read_graphs(ctx.path(GRAPHS))
    splits = _split(graphs, t["split"], ctx.seed)
    s1, s2 = default_grids()
    s1 = [tuple(r) for r in o["stage1"]] if o.get("stage1") else s1
    s2 = [tuple(r) for r in o["stage2"]] if o.get("stage2") else s2
    base = TrainConfig(learning_rate=float(t["learning_rate"]), batch_size=int(t["batch_size"]),
                       epochs=int(o["epochs"]), seed=ctx.seed, precision=ctx.cfg["precision"])
    res = grid_search(splits.train + splits.val, s1, s2, arch=o["arch"], base=base, folds=int(o["folds"]))
    ctx.write_text("grid.csv", res.to_csv())
    ctx.write_text("best.json", dumps_json({"model": res.model.to_dict(),
                                            "learning_rate": res.train.learning_rate,
                                            "batch_size": res.train.batch_size}))


def verb_eval(ctx: Context) -> None:
    from .formula_graph import read_graphs
    from .gnn.metrics import MetricsReport
    from .gnn.training import evaluate

    ctx.need(CHECKPOINT, GRAPHS, SPLITS)
    model = _load_model(ctx)
    parts = _load_splits(ctx, read_graphs(ctx.path(GRAPHS)))
    report = MetricsReport(threshold=float(ctx.opts["decision_threshold"]))
    for name in ctx.opts["splits"]:
        if name not in parts:
            raise UsageError(f"unknown split {name!r}")
        evaluate(model, parts[name], report.threshold, name=name, report=report)
    ctx.write_text(EVAL_METRICS, report.to_csv(model.cfg.arch))


def verb_predict(ctx: Context) -> None:
    from .formula_graph import read_graphs
    from .gnn.training import predict_proba

    ctx.need(CHECKPOINT, GRAPHS)
    model = _load_model(ctx)
    graphs = read_graphs(ctx.path(GRAPHS))
    probs = predict_proba(model, graphs) if graphs else np.zeros((0, model.cfg.n_outputs))
    ctx.write_text("predictions.csv", _csv(("formula_id", *(f"p{j}" for j in range(probs.shape[1]))),
                                           [(g.formula_id, *map(float, row)) for g, row in zip(graphs, probs)]))


def verb_explain(ctx: Context) -> None:
    from .formula_graph import VIRTUAL_KINDS, read_graphs
    from .interpret import FeatureGroup, ablate_feature, corpus_attention_stats, delta_csv, mask_node_kind

    ctx.need(CHECKPOINT, GRAPHS, SPLITS)
    model = _load_model(ctx)
    parts = _load_splits(ctx, read_graphs(ctx.path(GRAPHS)))
    split = parts[ctx.opts["split"]]
    reports = [ablate_feature(model, split, g) for g in FeatureGroup]
    reports += [mask_node_kind(model, split, k) for k in ("CHP",) + VIRTUAL_KINDS]
    ctx.write_text("delta_report.csv", delta_csv(reports))
    if model.cfg.arch != "GAT":
        log.warning("herb attention matrices need a GAT model; skipped for %s", model.cfg.arch)
        return
    herbs, pairs, mats = corpus_attention_stats(model, split)
    ctx.write_text("attention.json", dumps_json([m.to_dict() for m in mats]))
    ctx.write_text("herb_stats.csv", _csv(("chp_id", "freq", "mean_attention", "mean_emitted"),
                                              [(h.chp_id, h.freq, h.mean_attention, h.mean_emitted) for h in herbs]))
    ctx.write_text("pair_stats.csv", _csv(("chp_a", "chp_b", "count", "mean_attention"),
                                              [(p.chp_a, p.chp_b, p.count, p.mean_attention) for p in pairs]))


def verb_analyze(ctx: Context) -> None:
    from .embed.node2vec import Node2VecConfig, node2vec_embed
    from .embed.skipgram import SkipGramConfig
    from .netanalysis import (
        LayoutParams,
        build_ctp_network,
        centrality_profile,
        cooccurrence_matrix,
        enrich_pathways,
        forceatlas2,
        hierarchical_cluster,
        louvain,
    )

    kg = _load_kg(ctx)
    o = ctx.opts
    co = cooccurrence_matrix(kg)
    ctx.write_text("cooccurrence.csv", _csv(("token",) + co.tokens,
                                            [(t, *map(int, row)) for t, row in zip(co.tokens, co.values)]))
    g = co.to_graph()
    g.remove_nodes_from([u for u in list(g) if g.degree(u) == 0])
    if g.number_of_edges():
        part = louvain(g, seed=ctx.seed, restarts=int(o["louvain_restarts"]))
        ctx.write_text("communities.csv", _csv(("node", "community"), sorted(part.membership.items())))
        lay = forceatlas2(g, LayoutParams(iterations=int(o["layout_iterations"]), seed=ctx.seed))
        ctx.write_text("layout.csv", _csv(("node", "x", "y"), [(u, x, y) for u, (x, y) in lay.as_dict().items()]))
        ctx.write_text("centralities.csv", centrality_profile(g).to_csv())

    tg = kg.terms.to_networkx()
    if tg.number_of_nodes() >= int(o["n_clusters"]):
        dim = int(o["term_dim"])
        emb = node2vec_embed(tg, Node2VecConfig(dim=dim, skipgram=SkipGramConfig(window=10, dim=dim, epochs=5,
                                                                                 seed=ctx.seed)))
        terms = sorted(kg.terms.types)
        vecs = np.array([emb.get(t) if emb.get(t) is not None else np.zeros(dim) for t in terms])
        res = hierarchical_cluster(vecs, int(o["n_clusters"]), o["linkage"])
        ctx.write_text("clusters.csv", res.to_csv(terms))
        comp = res.composition([kg.terms.types[t] for t in terms])
        ctx.write_text("cluster_composition.csv", _csv(list(comp[0]), [list(r.values()) for r in comp]))
        ctx.write_text("cluster_centroids.csv", _csv(("cluster", *(f"d{i}" for i in range(dim))),
                                                     [(c, *row) for c, row in enumerate(res.centroids.tolist())]))
        ctx.write_text("linkage.csv", _csv(("a", "b", "height", "size"),
                                           [(int(a), int(b), float(h), int(s)) for a, b, h, s in res.linkage]))

    if kg.pathways.members:
        thr = float(o["affinity_threshold"])
        herb = o.get("herb")
        comps = set(kg.herb_compound_ids(herb)) if herb else {p.inchikey for p in kg.pairs}
        targets = {p.entrez_id for p in kg.pairs
                   if p.inchikey in comps and p.affinity is not None and p.affinity > thr}
        table = enrich_pathways(targets, kg.pathways)
        ctx.write_text("enrichment.csv", table.to_csv())
        chosen = table.significant(float(o["q_threshold"])) if o["network_pathways"] == "enriched" else None
        pairs = [p for p in kg.pairs if p.inchikey in comps]
        net = build_ctp_network(pairs, kg.compounds, kg.pathways, thr, pathways=chosen)
        ctx.write_text("network.json", net.to_json() + "\n")


def verb_project2d(ctx: Context) -> None:
    from .embed.features import FeatureMatrix
    from .embed.phylo import pca_fit_transform

    ctx.need(FEATURES)
    feats = FeatureMatrix.load(ctx.path(FEATURES))
    scores, explained = pca_fit_transform(feats.values, 2)
    ctx.write_text("projection.csv", _csv(("herb_id", "x", "y"),
                                          [(h, float(a), float(b)) for h, (a, b) in zip(feats.herb_ids, scores)]))
    ctx.write_text("projection.json", dumps_json({"method": "pca", "explained": [float(x) for x in explained]}))


def verb_report(ctx: Context) -> None:
    ctx.need(EVAL_METRICS)
    sources = [ctx.path(EVAL_METRICS)]
    for other in ctx.opts["runs"]:
        p = Path(other) / EVAL_METRICS
        if not p.exists():
            from .errors import MissingPrerequisite

            raise MissingPrerequisite(str(p))
        ctx.inputs[f"data:{p}"] = file_hash(p)
        sources.append(p)
    header, rows = None, []
    for p in sources:
        with open(p, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            h = next(reader)
            if header is None:
                header = h
            elif h != header:
                from .errors import LayoutMismatch

                raise LayoutMismatch(f"{p} has columns {h}, expected {header}")
            rows += list(reader)
    rows.sort(key=lambda r: (r[0], r[1], int(r[2])))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    ctx.write_text("metrics.csv", buf.getvalue())


VERB_FUNCS = {
    "ingest": verb_ingest, "embed": verb_embed, "diffuse": verb_diffuse, "encode": verb_encode,
    "train": verb_train, "tune": verb_tune, "eval": verb_eval, "predict": verb_predict, "explain": verb_explain,
    "analyze": verb_analyze, "project2d": verb_project2d, "report": verb_report,
}


def run(verb: str, cfg: dict) -> Path:
    """Execute one verb and record it in the manifest; returns the run directory."""
    import torch

    torch.set_num_threads(int(cfg["threads"]))
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    ctx = Context(verb, cfg, out)
    VERB_FUNCS[verb](ctx)
    _record(out, {"verb": verb, "config_hash": config_hash(cfg, verb), "config": cfg.get(verb, {}),
                  "seed": cfg["seed"], "precision": cfg["precision"],
                  "inputs": dict(sorted(ctx.inputs.items())), "outputs": dict(sorted(ctx.outputs.items())),
                  "versions": _versions()})
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="herbgraph", description="Herb knowledge-graph pipeline.")
    p.add_argument("--version", action="version", version=f"herbgraph {__version__}")
    sub = p.add_subparsers(dest="verb", required=True, metavar="VERB")
    for verb in VERBS:
        s = sub.add_parser(verb, help=f"run the {verb} stage" if verb != "verify" else "check the manifest chain")
        s.add_argument("--config", "-c", help="TOML or JSON config file")
        s.add_argument("--output-dir", "-o", dest="output_dir", help="run directory")
        if verb == "verify":
            continue
        s.add_argument("--data-dir", dest="data_dir", help="directory of input tables")
        s.add_argument("--seed", type=int)
        s.add_argument("--fixture", choices=("planted",), help="use the bundled synthetic corpus")
        s.add_argument("--fixture-formulas", dest="fixture_formulas", type=int)
        s.add_argument("--threads", type=int, help="torch intra-op threads")
        s.add_argument("--precision", choices=("f32", "f64"))
        s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key, e.g. train.epochs=5")
        s.add_argument("--verbose", "-v", action="store_true")
    return p


def main(argv=None) -> int:
    from .errors import HerbGraphError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "verify":
            out = Path(args.output_dir or (_read_config_file(Path(args.config)).get("output_dir", "run")
                                           if args.config else "run"))
            problems = verify_manifest(out)
            for msg in problems:
                print(msg, file=sys.stderr)
            return 1 if problems else 0
        cfg = resolve_config(args)
        run(args.verb, cfg)
    except UsageError as exc:
        print(f"herbgraph: usage error: {exc}", file=sys.stderr)
        return 2
    except HerbGraphError as exc:
        print(f"herbgraph: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
