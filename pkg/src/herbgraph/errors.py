"""Exception hierarchy shared by every herbgraph module."""

from __future__ import annotations


class HerbGraphError(Exception):
    """Base class for domain errors (CLI maps these to exit code 1)."""


# --- ingestion -------------------------------------------------------------


class MissingFile(HerbGraphError):
    def __init__(self, path):
        super().__init__(f"missing input file: {path}")
        self.path = path


class MalformedRow(HerbGraphError):
    def __init__(self, file, line, reason=""):
        msg = f"malformed row in {file} at line {line}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.file = file
        self.line = line
        self.reason = reason


class DuplicateId(HerbGraphError):
    def __init__(self, table, key):
        super().__init__(f"duplicate id {key!r} in {table}")
        self.table = table
        self.key = key


class NoDosedFormulas(HerbGraphError):
    pass


# --- embedding -------------------------------------------------------------


class EmptyCorpus(HerbGraphError):
    def __init__(self, kind):
        super().__init__(f"empty corpus: {kind}")
        self.kind = kind


class VocabularyTooSmall(HerbGraphError):
    pass


class UnresolvedLeaf(HerbGraphError):
    def __init__(self, taxid):
        super().__init__(f"taxid {taxid} does not resolve to a root")
        self.taxid = taxid


class DisjointForest(HerbGraphError):
    def __init__(self, pairs):
        shown = ", ".join(f"{a}/{b}" for a, b in pairs[:5])
        super().__init__(f"{len(pairs)} leaf pair(s) lie in different trees: {shown}")
        self.pairs = pairs


class LayoutMismatch(HerbGraphError):
    pass


# --- diffusion -------------------------------------------------------------


class TooFewCompounds(HerbGraphError):
    pass


class MissingAffinity(HerbGraphError):
    pass


# --- graphs / models -------------------------------------------------------


class UnknownHerbFeatures(HerbGraphError):
    def __init__(self, herb_id):
        super().__init__(f"no feature vector for herb {herb_id}")
        self.herb_id = herb_id


class ShapeMismatch(HerbGraphError):
    pass


class DivergedLoss(HerbGraphError):
    def __init__(self, epoch):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


class CountMismatch(HerbGraphError):
    pass


class ArchUnsupported(HerbGraphError):
    pass


# --- analytics -------------------------------------------------------------


class EmptyGraph(HerbGraphError):
    pass


class ConvergenceFailure(HerbGraphError):
    pass


class KTooLarge(HerbGraphError):
    pass


class EmptyTargetSet(HerbGraphError):
    pass


# --- cli -------------------------------------------------------------------


class MissingPrerequisite(HerbGraphError):
    def __init__(self, artifact):
        super().__init__(f"missing artifact: {artifact}")
        self.artifact = artifact
