"""In-memory knowledge graph: herbal pieces, formulas, compounds, targets,
terms, taxonomy and pathways, loaded from a directory of CSV tables.

Rows that reference unknown entities are dropped at load time and recorded
as issues; everything else that breaks a type invariant is kept and surfaced
by :func:`validate`.
"""

from __future__ import annotations

import csv
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DuplicateId, MalformedRow, MissingFile, NoDosedFormulas

KINGDOMS = ("Plantae", "Animalia", "Fungi", "Algae", "Mineralia")
N_LABELS = 5
PROPERTY_KINDS = ("nature", "flavor", "meridian")
TERM_TYPES = ("etiology", "pathogenesis", "pattern", "treatment method", "treatment principle")

HERB_ID_RE = re.compile(r"^CHP\d{5}$")
INCHIKEY_RE = re.compile(r"^[A-Z]{14}-[A-Z]{10}-[A-Z]$")


class Provenance(str, Enum):
    RECORDED = "Recorded"
    DIFFUSED = "Diffused"
    HIGH_FIDELITY = "HighFidelity"


@dataclass(frozen=True)
class HerbPiece:
    id: str
    name: str
    kingdom: str
    taxid: int | None = None
    natures: frozenset[str] = frozenset()
    flavors: frozenset[str] = frozenset()
    meridians: frozenset[str] = frozenset()
    efficacy: tuple[str, ...] = ()

    def properties(self, kind: str) -> frozenset[str]:
        return {"nature": self.natures, "flavor": self.flavors, "meridian": self.meridians}[kind]


@dataclass(frozen=True)
class Formula:
    id: str
    members: tuple[tuple[str, float | None], ...]
    labels: tuple[int, ...] | None = None

    @property
    def herb_ids(self) -> tuple[str, ...]:
        return tuple(h for h, _ in self.members)

    def dose_ratios(self) -> tuple[float, ...] | None:
        """Each dose divided by the formula total; None if any dose is unknown."""
        doses = [d for _, d in self.members]
        if not doses or any(d is None for d in doses):
            return None
        total = math.fsum(doses)
        if total <= 0:
            return None
        return tuple(d / total for d in doses)


@dataclass(frozen=True)
class CompoundRecord:
    inchikey: str
    descriptors: tuple[tuple[str, float], ...] = ()
    compound_class: str | None = None

    def descriptor(self, name: str) -> float | None:
        return dict(self.descriptors).get(name)


@dataclass(frozen=True)
class CompoundTargetPair:
    inchikey: str
    entrez_id: int
    affinity: float | None
    provenance: Provenance = Provenance.RECORDED


@dataclass(frozen=True)
class FeatureBlock:
    """Row-major real matrix with one row per identifier."""

    row_index: tuple[str, ...]
    values: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, FeatureBlock):
            return NotImplemented
        return self.row_index == other.row_index and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.row_index)

    def row(self, key: str) -> np.ndarray:
        return self.values[self.row_index.index(key)]


@dataclass(frozen=True)
class TaxonomyTable:
    parent: dict[int, int | None] = field(default_factory=dict)
    rank: dict[int, str] = field(default_factory=dict)

    def path_to_root(self, taxid: int) -> list[int] | None:
        """Ancestor chain starting at ``taxid``; None on a cycle or a dangling parent."""
        path, seen = [], set()
        node: int | None = taxid
        while node is not None:
            if node in seen or node not in self.parent:
                return None
            seen.add(node)
            path.append(node)
            node = self.parent[node]
        return path


@dataclass(frozen=True)
class TermGraph:
    types: dict[str, str] = field(default_factory=dict)
    names: dict[str, str] = field(default_factory=dict)
    edges: tuple[tuple[str, str, float], ...] = ()

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        for t, ty in self.types.items():
            g.add_node(t, type=ty)
        for a, b, w in self.edges:
            if g.has_edge(a, b):
                g[a][b]["weight"] += w
            else:
                g.add_edge(a, b, weight=w)
        return g


@dataclass(frozen=True)
class PathwayTable:
    members: dict[str, frozenset[int]] = field(default_factory=dict)
    universe: frozenset[int] = frozenset()


@dataclass(frozen=True)
class Vocabulary:
    natures: tuple[str, ...] = ()
    flavors: tuple[str, ...] = ()
    meridians: tuple[str, ...] = ()

    def tokens(self, kind: str) -> tuple[str, ...]:
        return {"nature": self.natures, "flavor": self.flavors, "meridian": self.meridians}[kind]


@dataclass(frozen=True)
class Issue:
    code: str
    table: str
    key: str
    detail: str = ""


@dataclass(frozen=True)
class KnowledgeGraph:
    herbs: dict[str, HerbPiece] = field(default_factory=dict)
    formulas: dict[str, Formula] = field(default_factory=dict)
    compounds: dict[str, CompoundRecord] = field(default_factory=dict)
    compound_features: FeatureBlock | None = None
    pairs: tuple[CompoundTargetPair, ...] = ()
    herb_compounds: tuple[tuple[str, str], ...] = ()
    taxonomy: TaxonomyTable = field(default_factory=TaxonomyTable)
    terms: TermGraph = field(default_factory=TermGraph)
    pathways: PathwayTable = field(default_factory=PathwayTable)
    vocab: Vocabulary = field(default_factory=Vocabulary)
    issues: tuple[Issue, ...] = ()

    def counts(self) -> dict[str, int]:
        return {
            "herbs": len(self.herbs),
            "formulas": len(self.formulas),
            "compounds": len(self.compounds),
            "pairs": len(self.pairs),
            "taxa": len(self.taxonomy.parent),
            "terms": len(self.terms.types),
            "term_edges": len(self.terms.edges),
            "pathways": len(self.pathways.members),
            "herb_compounds": len(self.herb_compounds),
        }

    def herb_compound_ids(self, herb_id: str) -> list[str]:
        return sorted({c for h, c in self.herb_compounds if h == herb_id})


# --- schema ------------------------------------------------------------------

DEFAULT_FILES = {
    "chp": "chp.csv",
    "vocabulary": "vocabulary.csv",
    "formulas": "formulas.csv",
    "formula_members": "formula_members.csv",
    "compounds": "compounds.csv",
    "compound_features": "compound_features.f32",
    "pairs": "pairs.csv",
    "chp_compounds": "chp_compounds.csv",
    "taxonomy": "taxonomy.csv",
    "terms": "terms.csv",
    "term_edges": "term_edges.csv",
    "pathways": "pathways.csv",
}
REQUIRED_TABLES = frozenset({"chp", "vocabulary", "formulas", "formula_members"})


@dataclass(frozen=True)
class SchemaConfig:
    """Maps logical tables to file names and source columns to canonical ones.

    ``columns`` is ``{table: {canonical_name: source_name}}``; it lets the same
    loader read a differently laid-out release without rewriting the files.
    """

    files: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_FILES))
    required: frozenset[str] = REQUIRED_TABLES
    columns: dict[str, dict[str, str]] = field(default_factory=dict)
    multi_sep: str = "|"

    @classmethod
    def from_mapping(cls, data: dict) -> "SchemaConfig":
        files = dict(DEFAULT_FILES)
        files.update(data.get("files", {}))
        required = frozenset(data.get("required", REQUIRED_TABLES))
        return cls(files=files, required=required, columns=data.get("columns", {}),
                   multi_sep=data.get("multi_sep", "|"))

    @classmethod
    def from_file(cls, path: str | Path) -> "SchemaConfig":
        path = Path(path)
        if path.suffix == ".toml":
            from ._toml import loads as toml_loads

            data = toml_loads(path.read_text(encoding="utf-8"))
        else:
            data = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_mapping(data)


# --- loading -----------------------------------------------------------------


class _Reader:
    def __init__(self, directory: Path, schema: SchemaConfig):
        self.dir = directory
        self.schema = schema

    def path(self, table: str) -> Path:
        return self.dir / self.schema.files[table]

    def rows(self, table: str, needed: Iterable[str]):
        """Yield (line_no, row dict keyed by canonical column) or nothing if optional and absent."""
        path = self.path(table)
        if not path.exists():
            if table in self.schema.required:
                raise MissingFile(path)
            return
        rename = self.schema.columns.get(table, {})
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise MalformedRow(path.name, 1, "missing header row") from None
            source_to_canon = {v: k for k, v in rename.items()}
            header = [source_to_canon.get(h.strip(), h.strip()) for h in header]
            missing = [c for c in needed if c not in header]
            if missing:
                raise MalformedRow(path.name, 1, f"missing columns {missing}")
            for line_no, raw in enumerate(reader, start=2):
                if not raw or all(not c.strip() for c in raw):
                    continue
                if len(raw) != len(header):
                    raise MalformedRow(path.name, line_no, f"expected {len(header)} fields, got {len(raw)}")
                yield line_no, dict(zip(header, (c.strip() for c in raw)))


def _split(value: str, sep: str) -> list[str]:
    return [v.strip() for v in value.split(sep) if v.strip()] if value else []


def _to_int(value: str, file: str, line: int, col: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise MalformedRow(file, line, f"{col}={value!r} is not an integer") from None


def _to_float(value: str, file: str, line: int, col: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise MalformedRow(file, line, f"{col}={value!r} is not a number") from None


def load_knowledge_graph(directory: str | Path, schema: SchemaConfig | None = None) -> KnowledgeGraph:
    """Parse every table under ``directory`` into a :class:`KnowledgeGraph`.

    Raises MissingFile, MalformedRow or DuplicateId. Dangling references are
    not fatal: the row is dropped and a ``DanglingRef`` issue is recorded.
    """
    schema = schema or SchemaConfig()
    rd = _Reader(Path(directory), schema)
    sep = schema.multi_sep
    issues: list[Issue] = []

    vocab_lists: dict[str, list[str]] = {k: [] for k in PROPERTY_KINDS}
    fname = schema.files["vocabulary"]
    for line, row in rd.rows("vocabulary", ("kind", "token")):
        kind = row["kind"]
        if kind not in vocab_lists:
            raise MalformedRow(fname, line, f"unknown property kind {kind!r}")
        if row["token"] not in vocab_lists[kind]:
            vocab_lists[kind].append(row["token"])
    vocab = Vocabulary(tuple(vocab_lists["nature"]), tuple(vocab_lists["flavor"]),
                       tuple(vocab_lists["meridian"]))

    herbs: dict[str, HerbPiece] = {}
    fname = schema.files["chp"]
    for line, row in rd.rows("chp", ("id", "name", "kingdom", "taxid", "natures", "flavors", "meridians")):
        hid = row["id"]
        if hid in herbs:
            raise DuplicateId("chp", hid)
        taxid = _to_int(row["taxid"], fname, line, "taxid") if row["taxid"] else None
        herbs[hid] = HerbPiece(
            id=hid, name=row["name"], kingdom=row["kingdom"], taxid=taxid,
            natures=frozenset(_split(row["natures"], sep)),
            flavors=frozenset(_split(row["flavors"], sep)),
            meridians=frozenset(_split(row["meridians"], sep)),
            efficacy=tuple(_split(row.get("efficacy", ""), sep)),
        )

    labels_by_formula: dict[str, tuple[int, ...] | None] = {}
    order: list[str] = []
    fname = schema.files["formulas"]
    for line, row in rd.rows("formulas", ("id", "labels")):
        fid = row["id"]
        if fid in labels_by_formula:
            raise DuplicateId("formulas", fid)
        lab = row["labels"]
        if lab:
            if len(lab) != N_LABELS or any(c not in "01" for c in lab):
                raise MalformedRow(fname, line, f"labels={lab!r} must be {N_LABELS} chars of 0/1")
            labels_by_formula[fid] = tuple(int(c) for c in lab)
        else:
            labels_by_formula[fid] = None
        order.append(fid)

    members: dict[str, list[tuple[str, float | None]]] = {fid: [] for fid in order}
    fname = schema.files["formula_members"]
    for line, row in rd.rows("formula_members", ("formula_id", "chp_id", "dose_g")):
        fid, hid = row["formula_id"], row["chp_id"]
        if fid not in members:
            issues.append(Issue("DanglingRef", "formula_members", f"{fid}/{hid}", f"unknown formula {fid}"))
            continue
        if hid not in herbs:
            issues.append(Issue("DanglingRef", "formula_members", f"{fid}/{hid}", f"unknown herb {hid}"))
            continue
        dose = _to_float(row["dose_g"], fname, line, "dose_g") if row["dose_g"] else None
        members[fid].append((hid, dose))
    formulas = {fid: Formula(fid, tuple(members[fid]), labels_by_formula[fid]) for fid in order}

    compounds: dict[str, CompoundRecord] = {}
    fname = schema.files["compounds"]
    for line, row in rd.rows("compounds", ("inchikey",)):
        key = row.pop("inchikey")
        if key in compounds:
            raise DuplicateId("compounds", key)
        cls = row.pop("class", "") or None
        desc = tuple(sorted((k, _to_float(v, fname, line, k)) for k, v in row.items() if v != ""))
        compounds[key] = CompoundRecord(key, desc, cls)

    features = None
    fpath = rd.path("compound_features")
    if fpath.exists():
        from .embed.io import read_matrix

        values, meta = read_matrix(fpath)
        features = FeatureBlock(tuple(meta["row_index"]), values)
    elif "compound_features" in schema.required:
        raise MissingFile(fpath)

    pairs: list[CompoundTargetPair] = []
    fname = schema.files["pairs"]
    for line, row in rd.rows("pairs", ("inchikey", "entrez_id", "affinity", "provenance")):
        key = row["inchikey"]
        if compounds and key not in compounds:
            issues.append(Issue("DanglingRef", "pairs", f"{key}/{row['entrez_id']}", f"unknown compound {key}"))
            continue
        try:
            prov = Provenance(row["provenance"] or "Recorded")
        except ValueError:
            raise MalformedRow(fname, line, f"provenance={row['provenance']!r}") from None
        aff = _to_float(row["affinity"], fname, line, "affinity") if row["affinity"] else None
        pairs.append(CompoundTargetPair(key, _to_int(row["entrez_id"], fname, line, "entrez_id"), aff, prov))

    herb_compounds: list[tuple[str, str]] = []
    for _, row in rd.rows("chp_compounds", ("chp_id", "inchikey")):
        hid, key = row["chp_id"], row["inchikey"]
        if hid not in herbs or (compounds and key not in compounds):
            issues.append(Issue("DanglingRef", "chp_compounds", f"{hid}/{key}", "unknown herb or compound"))
            continue
        herb_compounds.append((hid, key))

    parent: dict[int, int | None] = {}
    rank: dict[int, str] = {}
    fname = schema.files["taxonomy"]
    for line, row in rd.rows("taxonomy", ("taxid", "parent", "rank")):
        tid = _to_int(row["taxid"], fname, line, "taxid")
        if tid in parent:
            raise DuplicateId("taxonomy", str(tid))
        par = _to_int(row["parent"], fname, line, "parent") if row["parent"] else None
        parent[tid] = None if par == tid else par
        rank[tid] = row["rank"]

    types: dict[str, str] = {}
    names: dict[str, str] = {}
    for _, row in rd.rows("terms", ("term_id", "type")):
        if row["term_id"] in types:
            raise DuplicateId("terms", row["term_id"])
        types[row["term_id"]] = row["type"]
        if row.get("name"):
            names[row["term_id"]] = row["name"]
    term_edges: list[tuple[str, str, float]] = []
    fname = schema.files["term_edges"]
    for line, row in rd.rows("term_edges", ("src", "dst", "weight")):
        a, b = row["src"], row["dst"]
        if a not in types or b not in types:
            issues.append(Issue("DanglingRef", "term_edges", f"{a}/{b}", "unknown term"))
            continue
        term_edges.append((a, b, _to_float(row["weight"], fname, line, "weight")))

    pw: dict[str, set[int]] = {}
    fname = schema.files["pathways"]
    for line, row in rd.rows("pathways", ("pathway_id", "entrez_id")):
        pw.setdefault(row["pathway_id"], set()).add(_to_int(row["entrez_id"], fname, line, "entrez_id"))
    universe = frozenset().union(*pw.values()) if pw else frozenset()
    pathways = PathwayTable({k: frozenset(v) for k, v in pw.items()}, universe)

    return KnowledgeGraph(
        herbs=herbs, formulas=formulas, compounds=compounds, compound_features=features,
        pairs=tuple(pairs), herb_compounds=tuple(herb_compounds),
        taxonomy=TaxonomyTable(parent, rank), terms=TermGraph(types, names, tuple(term_edges)),
        pathways=pathways, vocab=vocab, issues=tuple(issues),
    )


def write_knowledge_graph(kg: KnowledgeGraph, directory: str | Path, schema: SchemaConfig | None = None) -> None:
    """Export ``kg`` in the canonical CSV layout (inverse of :func:`load_knowledge_graph`)."""
    schema = schema or SchemaConfig()
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    sep = schema.multi_sep

    def write(table, header, rows):
        with open(d / schema.files[table], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    def num(x):
        return "" if x is None else repr(x)

    write("vocabulary", ["kind", "token"],
          [(k, t) for k in PROPERTY_KINDS for t in kg.vocab.tokens(k)])
    write("chp", ["id", "name", "kingdom", "taxid", "natures", "flavors", "meridians", "efficacy"],
          [(h.id, h.name, h.kingdom, num(h.taxid), sep.join(sorted(h.natures)), sep.join(sorted(h.flavors)),
            sep.join(sorted(h.meridians)), sep.join(h.efficacy)) for h in kg.herbs.values()])
    write("formulas", ["id", "labels"],
          [(f.id, "".join(map(str, f.labels)) if f.labels else "") for f in kg.formulas.values()])
    write("formula_members", ["formula_id", "chp_id", "dose_g"],
          [(f.id, h, num(dose)) for f in kg.formulas.values() for h, dose in f.members])
    desc_names = sorted({n for c in kg.compounds.values() for n, _ in c.descriptors})
    write("compounds", ["inchikey", "class", *desc_names],
          [(c.inchikey, c.compound_class or "", *(num(c.descriptor(n)) for n in desc_names))
           for c in kg.compounds.values()])
    if kg.compound_features is not None:
        from .embed.io import write_matrix

        write_matrix(d / schema.files["compound_features"], kg.compound_features.values,
                     {"row_index": list(kg.compound_features.row_index)})
    write("pairs", ["inchikey", "entrez_id", "affinity", "provenance"],
          [(p.inchikey, p.entrez_id, num(p.affinity), p.provenance.value) for p in kg.pairs])
    write("chp_compounds", ["chp_id", "inchikey"], list(kg.herb_compounds))
    write("taxonomy", ["taxid", "parent", "rank"],
          [(t, num(p), kg.taxonomy.rank.get(t, "")) for t, p in kg.taxonomy.parent.items()])
    write("terms", ["term_id", "type", "name"],
          [(t, ty, kg.terms.names.get(t, "")) for t, ty in kg.terms.types.items()])
    write("term_edges", ["src", "dst", "weight"], [(a, b, repr(w)) for a, b, w in kg.terms.edges])
    write("pathways", ["pathway_id", "entrez_id"],
          [(p, e) for p, mem in kg.pathways.members.items() for e in sorted(mem)])


# --- validation --------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...]

    def __bool__(self):
        return bool(self.issues)

    def __len__(self):
        return len(self.issues)

    def codes(self) -> set[str]:
        return {i.code for i in self.issues}


def validate(kg: KnowledgeGraph) -> ValidationReport:
    """Check every type invariant; returns all violations (never raises)."""
    out: list[Issue] = []
    known = {k: set(kg.vocab.tokens(k)) for k in PROPERTY_KINDS}
    for h in kg.herbs.values():
        if not HERB_ID_RE.match(h.id):
            out.append(Issue("BadHerbId", "chp", h.id))
        if h.kingdom not in KINGDOMS:
            out.append(Issue("BadKingdom", "chp", h.id, h.kingdom))
        for kind in PROPERTY_KINDS:
            for tok in sorted(h.properties(kind) - known[kind]):
                out.append(Issue("UnknownToken", "chp", h.id, f"{kind}:{tok}"))
        if h.taxid is not None and kg.taxonomy.path_to_root(h.taxid) is None:
            out.append(Issue("UnresolvedTaxid", "chp", h.id, str(h.taxid)))

    for f in kg.formulas.values():
        if not f.members:
            out.append(Issue("EmptyFormula", "formulas", f.id))
        if f.labels is not None and not any(f.labels):
            out.append(Issue("NoLabelSet", "formulas", f.id))
        for hid, dose in f.members:
            if hid not in kg.herbs:
                out.append(Issue("DanglingRef", "formula_members", f"{f.id}/{hid}"))
            if dose is not None and not (math.isfinite(dose) and dose >= 0):
                out.append(Issue("BadDose", "formula_members", f"{f.id}/{hid}", repr(dose)))

    for c in kg.compounds:
        if not INCHIKEY_RE.match(c):
            out.append(Issue("BadInchikey", "compounds", c))
    if kg.compound_features is not None:
        fb = kg.compound_features
        if fb.values.ndim != 2 or fb.values.shape[0] != len(fb.row_index):
            out.append(Issue("FeatureShape", "compound_features", "*", str(fb.values.shape)))
        elif not np.all(np.isfinite(fb.values)):
            out.append(Issue("NonFiniteFeature", "compound_features", "*"))

    seen = Counter((p.inchikey, p.entrez_id, p.provenance) for p in kg.pairs)
    for (key, ent, prov), n in sorted(seen.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value)):
        if n > 1:
            out.append(Issue("DuplicatePair", "pairs", f"{key}/{ent}", prov.value))
    for p in kg.pairs:
        if p.affinity is not None and not math.isfinite(p.affinity):
            out.append(Issue("NonFiniteAffinity", "pairs", f"{p.inchikey}/{p.entrez_id}", repr(p.affinity)))

    reported: set[int] = set()
    for tid in sorted(kg.taxonomy.parent):
        if tid in reported:
            continue
        path, pos = [], {}
        node = tid
        while node is not None and node in kg.taxonomy.parent and node not in pos:
            pos[node] = len(path)
            path.append(node)
            node = kg.taxonomy.parent[node]
        if node is not None and node in pos:
            cycle = path[pos[node]:]
            if not reported.intersection(cycle):
                out.append(Issue("CycleDetected", "taxonomy", str(min(cycle)),
                                 "->".join(map(str, cycle))))
            reported.update(cycle)
        elif node is not None:
            out.append(Issue("DanglingParent", "taxonomy", str(path[-1]), str(node)))
            reported.add(path[-1])

    for a, b, w in kg.terms.edges:
        if a == b:
            out.append(Issue("SelfLoop", "term_edges", a))
        if not (math.isfinite(w) and w > 0):
            out.append(Issue("NonPositiveWeight", "term_edges", f"{a}/{b}", repr(w)))
    for t, ty in kg.terms.types.items():
        if ty not in TERM_TYPES:
            out.append(Issue("UnknownTermType", "terms", t, ty))

    for pid, mem in kg.pathways.members.items():
        outside = mem - kg.pathways.universe
        if outside:
            out.append(Issue("OutsideUniverse", "pathways", pid, str(sorted(outside))))
    return ValidationReport(tuple(out))


# --- corpus statistics -------------------------------------------------------


@dataclass(frozen=True)
class CorpusStats:
    n_formulas: int
    members_histogram: dict[int, int]
    mean_members: float
    dose_ratios: dict[str, tuple[float, ...]]
    mean_dose_ratio: float
    n_dosed_formulas: int


def formula_stats(kg: KnowledgeGraph) -> CorpusStats:
    """Members-per-formula histogram and pooled per-herb dose ratios.

    Formulas with any unknown dose are left out of the ratio statistics.
    """
    sizes = [len(f.members) for f in kg.formulas.values()]
    hist = dict(sorted(Counter(sizes).items()))
    ratios = {}
    for f in kg.formulas.values():
        r = f.dose_ratios()
        if r is not None:
            ratios[f.id] = r
    if not ratios:
        raise NoDosedFormulas("no formula has a complete set of known doses")
    pooled = [x for r in ratios.values() for x in r]
    return CorpusStats(
        n_formulas=len(sizes),
        members_histogram=hist,
        mean_members=float(np.mean(sizes)) if sizes else 0.0,
        dose_ratios=ratios,
        mean_dose_ratio=math.fsum(pooled) / len(pooled),
        n_dosed_formulas=len(ratios),
    )
