"""Turning coreference clusters into the antecedent arrays the cells consume.

A cluster is a set of mention spans denoting one entity.  For each token we
record the most recent strictly-earlier token of the same cluster (forward
antecedent) and the nearest strictly-later one (backward antecedent).  The
first mention of a cluster has no forward antecedent; tokens outside every
cluster have none in either direction.  ``NULL`` is the sentinel -1, kept
distinct from position 0, which is a valid token index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OverlapError, RangeError

NULL = -1

DOC_SEPARATOR = "<docsep>"


@dataclass
class TokenizedDocument:
    tokens: list[str]
    doc_id: str = ""

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("document must contain at least one token")
        if any("\n" in t for t in self.tokens):
            raise ValueError("tokens must not contain newlines")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class MentionSpan:
    """Half-open token span [start, end)."""

    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad mention span [{self.start}, {self.end})")

    def tokens(self) -> range:
        return range(self.start, self.end)


@dataclass
class CorefClusters:
    clusters: list[list[MentionSpan]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.clusters)

    def num_mentions(self) -> int:
        return sum(len(c) for c in self.clusters)

    def to_spans(self) -> list[list[list[int]]]:
        return [[[m.start, m.end] for m in c] for c in self.clusters]

    @staticmethod
    def from_spans(spans) -> "CorefClusters":
        return CorefClusters([[MentionSpan(int(s), int(e)) for s, e in c] for c in spans])


@dataclass
class AntecedentMap:
    """Per-token antecedent indices plus cluster ids; -1 marks NULL."""

    forward: np.ndarray
    backward: np.ndarray
    cluster_of: np.ndarray

    def __len__(self) -> int:
        return len(self.forward)

    def num_clusters(self) -> int:
        ids = self.cluster_of[self.cluster_of != NULL]
        return int(ids.max()) + 1 if ids.size else 0

    def copy(self) -> "AntecedentMap":
        return AntecedentMap(self.forward.copy(), self.backward.copy(), self.cluster_of.copy())


def token_membership(clusters: CorefClusters, num_tokens: int) -> np.ndarray:
    """cluster id per token, NULL outside clusters; raises on overlap."""
    cluster_of = np.full(num_tokens, NULL, dtype=np.int64)
    for cid, mentions in enumerate(clusters.clusters):
        for span in mentions:
            if span.end > num_tokens:
                raise RangeError(f"mention {span} exceeds document length {num_tokens}")
            for t in span.tokens():
                if cluster_of[t] != NULL and cluster_of[t] != cid:
                    raise OverlapError(f"token {t} claimed by clusters {cluster_of[t]} and {cid}")
                cluster_of[t] = cid
    return cluster_of


def normalize_clusters(clusters: CorefClusters, num_tokens: int) -> CorefClusters:
    """Resolve overlapping membership: the innermost mention wins.

    Tokens claimed by several clusters go to the mention whose start is
    latest (ties: shorter mention, then lower cluster index).  Mentions are
    re-derived as maximal runs of surviving tokens, and emptied clusters are
    dropped.
    """
    claim: dict[int, tuple] = {}
    for cid, mentions in enumerate(clusters.clusters):
        for span in mentions:
            if span.end > num_tokens:
                raise RangeError(f"mention {span} exceeds document length {num_tokens}")
            for t in span.tokens():
                key = (-span.start, span.end - span.start, cid)
                if t not in claim or key < claim[t]:
                    claim[t] = key
    out: list[list[MentionSpan]] = []
    for cid, mentions in enumerate(clusters.clusters):
        kept: list[MentionSpan] = []
        for span in mentions:
            run_start = None
            for t in span.tokens():
                mine = claim.get(t, (None,))[2] == cid if t in claim else False
                if mine and run_start is None:
                    run_start = t
                elif not mine and run_start is not None:
                    kept.append(MentionSpan(run_start, t))
                    run_start = None
            if run_start is not None:
                kept.append(MentionSpan(run_start, span.end))
        if kept:
            out.append(kept)
    return CorefClusters(out)


def build_antecedents(doc: TokenizedDocument, clusters: CorefClusters) -> AntecedentMap:
    """Most recent earlier / nearest later same-cluster token for each token.

    Requires disjoint token membership (run ``normalize_clusters`` first when
    that is not guaranteed); overlap raises OverlapError.
    """
    n = len(doc)
    cluster_of = token_membership(clusters, n)
    return antecedents_from_membership(cluster_of)


def antecedents_from_membership(cluster_of: np.ndarray) -> AntecedentMap:
    n = len(cluster_of)
    forward = np.full(n, NULL, dtype=np.int64)
    backward = np.full(n, NULL, dtype=np.int64)
    last_seen: dict[int, int] = {}
    for t in range(n):
        cid = int(cluster_of[t])
        if cid == NULL:
            continue
        if cid in last_seen:
            forward[t] = last_seen[cid]
            backward[last_seen[cid]] = t
        last_seen[cid] = t
    return AntecedentMap(forward, backward, np.asarray(cluster_of, dtype=np.int64))


def exact_match_annotator(doc: TokenizedDocument, entity_lexicon: set[str]) -> CorefClusters:
    """One cluster per lexicon token that occurs at least twice.

    Matching is exact modulo case; no stemming, so plural and singular
    surface forms stay separate.  Clusters are ordered by first occurrence.
    """
    lowered = [t.lower() for t in doc.tokens]
    positions: dict[str, list[int]] = {}
    for i, tok in enumerate(lowered):
        if tok in entity_lexicon:
            positions.setdefault(tok, []).append(i)
    groups = [p for p in positions.values() if len(p) >= 2]
    groups.sort(key=lambda p: p[0])
    return CorefClusters([[MentionSpan(i, i + 1) for i in p] for p in groups])


def _sentence_windows(tokens: list[str]) -> list[tuple[int, int]]:
    """Half-open token windows delimited by "." tokens."""
    windows = []
    start = 0
    for i, tok in enumerate(tokens):
        if tok == ".":
            windows.append((start, i + 1))
            start = i + 1
    if start < len(tokens):
        windows.append((start, len(tokens)))
    return windows


def _find_subsequence(haystack: list[str], needle: list[str]) -> list[int]:
    hits = []
    n = len(needle)
    for i in range(len(haystack) - n + 1):
        if haystack[i : i + n] == needle:
            hits.append(i)
    return hits


def filter_clusters(
    clusters: CorefClusters,
    doc: TokenizedDocument,
    candidates: set[str],
    head_entity: str | None,
) -> CorefClusters:
    """Keep clusters that mention a candidate or co-occur with the head entity.

    A cluster survives iff (a) some mention's lowercased space-joined text
    equals a candidate, or (b) some mention lies in the same period-delimited
    sentence window as an occurrence of the head entity's token sequence.
    """
    lowered = [t.lower() for t in doc.tokens]
    head_windows: list[tuple[int, int]] = []
    if head_entity:
        head_tokens = head_entity.lower().split()
        hits = _find_subsequence(lowered, head_tokens)
        if hits:
            windows = _sentence_windows(doc.tokens)
            for start in hits:
                end = start + len(head_tokens)
                head_windows.extend(w for w in windows if start < w[1] and end > w[0])
    kept = []
    for mentions in clusters.clusters:
        keep = False
        for span in mentions:
            text = " ".join(lowered[span.start : span.end])
            if text in candidates:
                keep = True
                break
            if any(span.start < w1 and span.end > w0 for w0, w1 in head_windows):
                keep = True
                break
        if keep:
            kept.append(mentions)
    return CorefClusters(kept)


def cap_clusters(clusters: CorefClusters, cap: int) -> CorefClusters:
    """Keep the ``cap`` clusters with most mentions (earlier first mention wins ties)."""
    if cap < 1:
        raise RangeError("cap must be >= 1")
    if len(clusters) <= cap:
        return CorefClusters([list(c) for c in clusters.clusters])
    ranked = sorted(
        range(len(clusters)),
        key=lambda i: (-len(clusters.clusters[i]), min(m.start for m in clusters.clusters[i])),
    )
    keep = sorted(ranked[:cap])
    return CorefClusters([list(clusters.clusters[i]) for i in keep])


def corrupt_annotations(
    antemap: AntecedentMap,
    mode: str,
    fraction: float,
    seed: int,
) -> AntecedentMap:
    """Degrade coreference annotations for ablation runs.

    ``remove-fraction`` drops a seeded uniform selection of
    round(fraction * N) linked tokens (N = tokens with a forward antecedent)
    from their clusters and rebuilds both directions, so surviving mentions
    re-link across the gaps.  ``randomize`` keeps the linked positions but
    replaces every forward antecedent with a uniform draw from the strict
    past and every backward antecedent with a draw from the strict future.
    """
    if not 0.0 <= fraction <= 1.0:
        raise RangeError("fraction must be in [0, 1]")
    rng = np.random.default_rng(seed)
    if mode == "remove-fraction":
        linked = np.flatnonzero(antemap.forward != NULL)
        n_remove = int(round(fraction * len(linked)))
        if n_remove == 0:
            return antemap.copy()
        chosen = rng.choice(linked, size=n_remove, replace=False)
        membership = antemap.cluster_of.copy()
        membership[chosen] = NULL
        return antecedents_from_membership(membership)
    if mode == "randomize":
        n = len(antemap)
        forward = antemap.forward.copy()
        backward = antemap.backward.copy()
        for t in np.flatnonzero(forward != NULL):
            forward[t] = rng.integers(0, t)
        for t in np.flatnonzero(backward != NULL):
            backward[t] = rng.integers(t + 1, n)
        return AntecedentMap(forward, backward, antemap.cluster_of.copy())
    raise ValueError(f"unknown corruption mode {mode!r}")


@dataclass
class ConcatResult:
    doc: TokenizedDocument
    order: list[int]
    offsets: list[int]

    def reindex_clusters(self, clusters_by_doc: list[CorefClusters]) -> CorefClusters:
        """Shift each source document's mention spans to concatenated positions."""
        merged: list[list[MentionSpan]] = []
        for pos, doc_idx in enumerate(self.order):
            off = self.offsets[pos]
            for mentions in clusters_by_doc[doc_idx].clusters:
                merged.append([MentionSpan(m.start + off, m.end + off) for m in mentions])
        return CorefClusters(merged)


def concat_passages(docs: list[TokenizedDocument], seed: int) -> ConcatResult:
    """Join documents in a seeded random order with one separator token between."""
    if not docs:
        raise ValueError("docs must be nonempty")
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(len(docs)))
    tokens: list[str] = []
    offsets: list[int] = []
    for pos, doc_idx in enumerate(order):
        if pos > 0:
            tokens.append(DOC_SEPARATOR)
        offsets.append(len(tokens))
        tokens.extend(docs[doc_idx].tokens)
    joined = TokenizedDocument(tokens, doc_id="+".join(docs[i].doc_id for i in order))
    return ConcatResult(joined, [int(i) for i in order], offsets)
