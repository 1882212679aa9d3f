"""Incident-description analytics: tokenize, TF-IDF, PCA, seeded K-Means.

All of it is implemented here rather than delegated, because the exact
variants matter for reproducibility:

* TF is raw count over document length; IDF is ln((1+N)/(1+df)) + 1.
* PCA eigenpairs come from deflated power iteration (residual tolerance
  1e-10, cap 10000 iterations per component) with a fixed sign convention:
  the largest-magnitude coordinate of each component is positive. Eigenvalue
  ties order by the first differing coordinate.
* K-Means uses greedy k-means++ seeding (several candidates per step, best
  total potential wins) driven by the SplitMix64 stream in ``rng``, Lloyd
  iterations until centroid movement < 1e-9 or 300 rounds, lowest cluster
  index on distance ties, and empty clusters repaired by claiming the point
  currently farthest from its assigned centroid.
* select_k runs 5 restarts per k (seeds derived via ``derive_seed``) and
  picks the elbow: argmax of the second difference of the best-inertia
  curve, zero at the range boundaries, ties to the smaller k.

Everything is deterministic given (input, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    DocumentSyntaxError,
    EmptyCorpusError,
    InsufficientPointsError,
    SchemaError,
)
from .metrics import Variable
from .rng import SplitMix64, derive_seed

POWER_TOLERANCE = 1e-10
POWER_MAX_ITER = 10_000
LLOYD_MOVEMENT_TOLERANCE = 1e-9
LLOYD_MAX_ITER = 300
KMEANS_RESTARTS = 5
TOP_TERMS = 10


@dataclass(frozen=True)
class IncidentDocument:
    incident_id: str
    description: str
    technique_refs: frozenset[str] = frozenset()
    severity: str | None = None
    attack_vector: str | None = None
    affected_assets: tuple[str, ...] = ()
    timestamp: str | None = None


@dataclass(frozen=True)
class Corpus:
    documents: tuple[IncidentDocument, ...]

    def __post_init__(self):
        ids = [d.incident_id for d in self.documents]
        if len(ids) != len(set(ids)):
            raise SchemaError("duplicate incident_id in corpus")


@dataclass(frozen=True)
class TfIdfMatrix:
    vocabulary: tuple[str, ...]
    rows: np.ndarray
    doc_ids: tuple[str, ...]


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # k x d, rows orthonormal
    eigenvalues: tuple[float, ...]


@dataclass(frozen=True)
class KMeansModel:
    k: int
    centroids: np.ndarray
    assignments: tuple[int, ...]
    inertia: float
    iterations: int
    seed: int
    inertia_history: tuple[float, ...] = ()


@dataclass(frozen=True)
class ClusterSummary:
    cluster: int
    size: int
    top_terms: tuple[str, ...]
    technique_counts: tuple[tuple[str, int], ...]
    suggested_variable: Variable | None


@dataclass(frozen=True)
class ClusterReport:
    clusters: tuple[ClusterSummary, ...]
    k: int
    seed: int
    assignments: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class ClusterConfig:
    k_min: int = 1
    k_max: int = 8
    pca_k: int = 4
    stopwords: frozenset[str] = frozenset()
    seed: int = 0


# Terms that tie a cluster to one of the four variables. Kept short and
# disjoint; anything ambiguous stays unlabelled for the analyst to decide.
VARIABLE_LEXICON: dict[Variable, frozenset[str]] = {
    Variable.Exposure: frozenset({
        "exposure", "exposed", "port", "ports", "public", "perimeter", "internet",
        "privileged", "unregistered", "scan", "scanning", "visible", "surface",
    }),
    Variable.Traceability: frozenset({
        "logging", "logs", "log", "audit", "trace", "traceability", "monitoring",
        "siem", "unlogged", "untracked", "trail", "visibility",
    }),
    Variable.Motivation: frozenset({
        "ransom", "ransomware", "extortion", "market", "monetize", "profit",
        "motivation", "darkweb", "sale", "valuable", "lucrative", "payout",
    }),
    Variable.SystemsUpdate: frozenset({
        "patch", "patched", "unpatched", "patching", "update", "updates",
        "outdated", "legacy", "firmware", "version", "eol", "upgrade",
    }),
}


def tokenize(text: str, stopwords: frozenset[str] | set[str] = frozenset()) -> list[str]:
    """Lowercase, split on every non-alphanumeric codepoint, drop short terms."""
    lowered = text.lower()
    cleaned = "".join(ch if ch.isalnum() else " " for ch in lowered)
    return [t for t in cleaned.split() if len(t) >= 2 and t not in stopwords]


def tfidf_from_terms(doc_terms: Sequence[Sequence[str]], doc_ids: Sequence[str]) -> TfIdfMatrix:
    """TF-IDF over pre-tokenized documents.

    tf(t, d) = count(t, d) / len(d); idf(t) = ln((1+N)/(1+df(t))) + 1.
    Vocabulary is sorted lexicographically; rows are dense.
    """
    if len(doc_terms) != len(doc_ids):
        raise DimensionError("doc_terms and doc_ids must have equal length")
    if not doc_terms or not any(doc_terms):
        raise EmptyCorpusError("no document with at least one term")
    vocabulary = tuple(sorted({t for terms in doc_terms for t in terms}))
    index = {t: i for i, t in enumerate(vocabulary)}
    n_docs = len(doc_terms)
    df = np.zeros(len(vocabulary), dtype=np.int64)
    for terms in doc_terms:
        for t in set(terms):
            df[index[t]] += 1
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    rows = np.zeros((n_docs, len(vocabulary)), dtype=np.float64)
    for i, terms in enumerate(doc_terms):
        if not terms:
            continue
        counts: dict[str, int] = {}
        for t in terms:
            counts[t] = counts.get(t, 0) + 1
        length = len(terms)
        for t, c in counts.items():
            j = index[t]
            rows[i, j] = (c / length) * idf[j]
    return TfIdfMatrix(vocabulary=vocabulary, rows=rows, doc_ids=tuple(doc_ids))


def tfidf(corpus: Corpus, stopwords: frozenset[str] | set[str] = frozenset()) -> TfIdfMatrix:
    if not corpus.documents:
        raise EmptyCorpusError("corpus has no documents")
    terms = [tokenize(d.description, stopwords) for d in corpus.documents]
    return tfidf_from_terms(terms, [d.incident_id for d in corpus.documents])


def _orthogonalize(vec: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    for b in basis:
        vec = vec - (b @ vec) * b
    return vec


def _start_vector(dim: int, basis: list[np.ndarray]) -> np.ndarray:
    """Deterministic start: normalized ones, else first basis axis with a
    nonzero component outside the span already found."""
    candidates = [np.ones(dim)]
    candidates.extend(np.eye(dim)[i] for i in range(dim))
    for candidate in candidates:
        v = _orthogonalize(candidate.astype(np.float64), basis)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm
    raise ConvergenceError("no start vector orthogonal to found components")


def _dominant_eigenpair(mat: np.ndarray, basis: list[np.ndarray]) -> tuple[float, np.ndarray]:
    """Largest eigenpair of ``mat`` restricted to the complement of ``basis``.

    A matvec smaller than the matrix's floating-point noise floor means the
    remaining spectrum is numerically null; without that cutoff, normalizing
    the noise re-amplifies leakage along already-deflated directions.
    """
    scale = float(np.linalg.norm(mat))
    null_floor = max(scale, 1.0) * 1e-13
    v = _start_vector(mat.shape[0], basis)
    for _ in range(POWER_MAX_ITER):
        w = _orthogonalize(mat @ v, basis)
        norm = np.linalg.norm(w)
        if norm < null_floor:
            return 0.0, v
        v_next = _orthogonalize(w / norm, basis)
        renorm = np.linalg.norm(v_next)
        if renorm < 0.5:
            # step was dominated by leakage into the deflated span
            return 0.0, v
        v_next = v_next / renorm
        lam = float(v_next @ (mat @ v_next))
        residual = np.linalg.norm(_orthogonalize(mat @ v_next, basis) - lam * v_next)
        v = v_next
        if residual <= POWER_TOLERANCE * max(1.0, abs(lam)):
            return lam, v
    raise ConvergenceError(f"power iteration did not converge in {POWER_MAX_ITER} steps")


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    idx = int(np.argmax(np.abs(vec)))
    return -vec if vec[idx] < 0 else vec


def pca_fit(rows: np.ndarray, k: int) -> PcaModel:
    """Top-k eigenpairs of the (n-1)-divisor covariance of ``rows``."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise DimensionError("rows must be a 2-D matrix")
    n, d = rows.shape
    if n < 2:
        raise DimensionError("PCA needs at least 2 rows")
    if not 1 <= k <= min(n, d):
        raise DimensionError(f"k must lie in [1, {min(n, d)}], got {k}")
    mean = rows.mean(axis=0)
    centered = rows - mean
    cov = centered.T @ centered / (n - 1)

    basis: list[np.ndarray] = []
    pairs: list[tuple[float, np.ndarray]] = []
    for _ in range(k):
        lam, vec = _dominant_eigenpair(cov, basis)
        lam = 0.0 if lam < 0 and lam >= -1e-10 else lam
        lam = max(lam, 0.0)
        vec = _fix_sign(vec)
        basis.append(vec)
        pairs.append((lam, vec))
    # descending eigenvalue; exact ties order by first differing coordinate
    pairs.sort(key=lambda p: (-p[0], tuple(p[1])))
    components = np.vstack([vec for _, vec in pairs])
    eigenvalues = tuple(lam for lam, _ in pairs)
    return PcaModel(mean=mean, components=components, eigenvalues=eigenvalues)


def pca_transform(model: PcaModel, rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.mean.shape[0]:
        raise DimensionError("rows do not match the fitted dimensionality")
    return (rows - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, projected: np.ndarray) -> np.ndarray:
    return np.asarray(projected) @ model.components + model.mean


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeanspp_seeds(points: np.ndarray, k: int, gen: SplitMix64) -> np.ndarray:
    """Greedy k-means++: per step, draw 2 + floor(ln k) candidates from the
    D^2 distribution and keep the one minimizing the total potential."""
    n = points.shape[0]
    chosen = [gen.next_below(n)]
    d2 = _squared_distances(points, points[chosen[-1]][None, :])[:, 0]
    n_candidates = 2 + int(np.log(k)) if k > 1 else 0
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # all mass collapsed (duplicate points): next lowest unchosen index
            idx = next(i for i in range(n) if i not in chosen)
            chosen.append(idx)
            continue
        cumulative = np.cumsum(d2)
        best_idx = -1
        best_potential = np.inf
        best_d2 = d2
        for _ in range(n_candidates):
            r = gen.next_float() * total
            idx = min(int(np.searchsorted(cumulative, r, side="right")), n - 1)
            cand_d2 = np.minimum(d2, _squared_distances(points, points[idx][None, :])[:, 0])
            potential = float(cand_d2.sum())
            if potential < best_potential:
                best_idx, best_potential, best_d2 = idx, potential, cand_d2
        chosen.append(best_idx)
        d2 = best_d2
    return points[chosen].copy()


def kmeans(points: np.ndarray, k: int, seed: int) -> KMeansModel:
    """Deterministic seeded K-Means; see module docstring for conventions."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DimensionError("points must be a 2-D matrix")
    if not np.all(np.isfinite(points)):
        raise DimensionError("points must be finite")
    n = points.shape[0]
    if k < 1 or k > n:
        raise InsufficientPointsError(f"need 1 <= k <= {n}, got {k}")

    gen = SplitMix64(seed)
    centroids = _kmeanspp_seeds(points, k, gen)
    history: list[float] = []
    assignments = np.zeros(n, dtype=np.int64)
    iterations = 0

    for _ in range(LLOYD_MAX_ITER):
        iterations += 1
        d2 = _squared_distances(points, centroids)
        assignments = np.argmin(d2, axis=1)  # ties pick the lowest index

        # repair empty clusters: claim the point farthest from its centroid
        for cluster in range(k):
            if not np.any(assignments == cluster):
                per_point = d2[np.arange(n), assignments]
                farthest = int(np.argmax(per_point))
                assignments[farthest] = cluster
                d2[farthest, :] = np.inf
                d2[farthest, cluster] = 0.0

        new_centroids = centroids.copy()
        for cluster in range(k):
            members = points[assignments == cluster]
            if len(members):
                new_centroids[cluster] = members.mean(axis=0)

        inertia = float(_squared_distances(points, new_centroids)[np.arange(n), assignments].sum())
        if history:
            assert inertia <= history[-1] + 1e-9 * max(1.0, history[-1]), "inertia increased"
        history.append(inertia)

        movement = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if movement < LLOYD_MOVEMENT_TOLERANCE:
            break

    return KMeansModel(
        k=k,
        centroids=centroids,
        assignments=tuple(int(a) for a in assignments),
        inertia=history[-1],
        iterations=iterations,
        seed=seed,
        inertia_history=tuple(history),
    )


def kmeans_best(points: np.ndarray, k: int, seed: int, restarts: int = KMEANS_RESTARTS) -> KMeansModel:
    """Best-of-``restarts`` run; restart r uses derive_seed(seed, k, r)."""
    best: KMeansModel | None = None
    for r in range(restarts):
        model = kmeans(points, k, derive_seed(seed, k, r))
        if best is None or model.inertia < best.inertia:
            best = model
    assert best is not None
    return best


def select_k(points: np.ndarray, k_min: int, k_max: int, seed: int) -> int:
    """Elbow selection over [k_min, k_max]; ties go to the smaller k."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k_min < 1 or k_max < k_min:
        raise DimensionError(f"need 1 <= k_min <= k_max, got [{k_min}, {k_max}]")
    if k_max > n:
        raise InsufficientPointsError(f"k_max {k_max} exceeds point count {n}")
    ks = list(range(k_min, k_max + 1))
    if len(ks) == 1:
        return ks[0]
    inertias = [kmeans_best(points, k, seed).inertia for k in ks]
    second_diff = [0.0] * len(ks)
    for i in range(1, len(ks) - 1):
        second_diff[i] = inertias[i - 1] - 2.0 * inertias[i] + inertias[i + 1]
    best_idx = max(range(len(ks)), key=lambda i: (second_diff[i], -ks[i]))
    return ks[best_idx]


def _suggest_variable(top_terms: Sequence[str]) -> Variable | None:
    terms = set(top_terms)
    overlaps = {var: len(terms & lexicon) for var, lexicon in VARIABLE_LEXICON.items()}
    best = max(overlaps.values())
    if best == 0:
        return None
    winners = [var for var, count in overlaps.items() if count == best]
    return winners[0] if len(winners) == 1 else None


def cluster_incidents(corpus: Corpus, config: ClusterConfig = ClusterConfig()) -> ClusterReport:
    """Full pipeline: tfidf -> pca -> select_k -> kmeans -> labelled report."""
    matrix = tfidf(corpus, config.stopwords)
    n = len(corpus.documents)

    points = matrix.rows
    if n >= 2:
        pca_k = max(1, min(config.pca_k, n, len(matrix.vocabulary)))
        model = pca_fit(matrix.rows, pca_k)
        points = pca_transform(model, matrix.rows)

    k_max = min(config.k_max, n)
    k_min = min(config.k_min, k_max)
    k = select_k(points, k_min, k_max, config.seed) if n > 1 else 1
    km = kmeans_best(points, k, config.seed)

    summaries = []
    for cluster in range(k):
        member_idx = [i for i, a in enumerate(km.assignments) if a == cluster]
        size = len(member_idx)
        if size:
            mean_tfidf = matrix.rows[member_idx].mean(axis=0)
            order = sorted(range(len(matrix.vocabulary)), key=lambda j: (-mean_tfidf[j], matrix.vocabulary[j]))
            top = tuple(matrix.vocabulary[j] for j in order[:TOP_TERMS] if mean_tfidf[j] > 0)
        else:
            top = ()
        counts: dict[str, int] = {}
        for i in member_idx:
            for ref in corpus.documents[i].technique_refs:
                counts[ref] = counts.get(ref, 0) + 1
        summaries.append(ClusterSummary(
            cluster=cluster,
            size=size,
            top_terms=top,
            technique_counts=tuple(sorted(counts.items())),
            suggested_variable=_suggest_variable(top),
        ))
    assignments = tuple((doc.incident_id, int(km.assignments[i])) for i, doc in enumerate(corpus.documents))
    return ClusterReport(clusters=tuple(summaries), k=k, seed=config.seed, assignments=assignments)


def parse_corpus(data: bytes) -> Corpus:
    """Corpus file: JSON list of incident documents."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        if isinstance(exc, json.JSONDecodeError):
            raise DocumentSyntaxError(f"malformed JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
        raise DocumentSyntaxError(f"corpus is not UTF-8: {exc}") from exc
    if not isinstance(doc, list):
        raise SchemaError("corpus must be a JSON list")
    documents = []
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict):
            raise SchemaError(f"corpus[{i}] must be an object")
        unknown = set(entry) - {"incident_id", "description", "technique_refs", "severity",
                                "attack_vector", "affected_assets", "timestamp"}
        if unknown:
            raise SchemaError(f"corpus[{i}]: unknown fields {sorted(unknown)}")
        incident_id = entry.get("incident_id")
        description = entry.get("description")
        if not isinstance(incident_id, str) or not incident_id:
            raise SchemaError(f"corpus[{i}]: missing incident_id")
        if not isinstance(description, str):
            raise SchemaError(f"corpus[{i}]: missing description")
        refs = entry.get("technique_refs", [])
        if not isinstance(refs, list) or not all(isinstance(r, str) for r in refs):
            raise SchemaError(f"corpus[{i}]: technique_refs must be a list of strings")
        assets = entry.get("affected_assets", [])
        if not isinstance(assets, list) or not all(isinstance(a, str) for a in assets):
            raise SchemaError(f"corpus[{i}]: affected_assets must be a list of strings")
        documents.append(IncidentDocument(
            incident_id=incident_id,
            description=description,
            technique_refs=frozenset(refs),
            severity=entry.get("severity"),
            attack_vector=entry.get("attack_vector"),
            affected_assets=tuple(assets),
            timestamp=entry.get("timestamp"),
        ))
    return Corpus(documents=tuple(documents))


def load_stopwords(data: bytes) -> frozenset[str]:
    """Stopword file: one term per line, blank lines ignored."""
    return frozenset(line.strip().lower() for line in data.decode("utf-8").splitlines() if line.strip())


def render_cluster_table(report: ClusterReport) -> str:
    """Aligned text table of the cluster report for terminal reading."""
    header = f"{'cluster':>7}  {'size':>4}  {'variable':<14} top terms"
    lines = [header, "-" * len(header)]
    for s in report.clusters:
        variable = s.suggested_variable.value if s.suggested_variable else "-"
        lines.append(f"{s.cluster:>7}  {s.size:>4}  {variable:<14} {', '.join(s.top_terms[:6])}")
    lines.append(f"k={report.k} seed={report.seed} documents={sum(s.size for s in report.clusters)}")
    return "\n".join(lines) + "\n"


def render_cluster_report(report: ClusterReport) -> dict:
    """JSON-ready view of a cluster report."""
    return {
        "k": report.k,
        "seed": report.seed,
        "clusters": [
            {
                "cluster": s.cluster,
                "size": s.size,
                "top_terms": list(s.top_terms),
                "technique_counts": {ref: count for ref, count in s.technique_counts},
                "suggested_variable": s.suggested_variable.value if s.suggested_variable else None,
            }
            for s in report.clusters
        ],
        "assignments": {doc_id: cluster for doc_id, cluster in report.assignments},
    }
