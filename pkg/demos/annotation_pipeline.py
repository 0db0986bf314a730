#!/usr/bin/env python3
"""From raw tokens to the antecedent arrays the recurrence consumes.

Annotates a passage by exact string match against a small entity lexicon,
prunes and caps the clusters, derives per-token antecedent links in both
directions, and shows what the two corruption modes do to them.

    python3 demos/annotation_pipeline.py
"""

import numpy as np

from corefgru.coref import (
    NULL,
    TokenizedDocument,
    antecedents_from_membership,
    cap_clusters,
    corrupt_annotations,
    exact_match_annotator,
    filter_clusters,
    token_membership,
)

PASSAGE = (
    "fred took the milk . fred went to the park . "
    "mary went to the school . fred dropped the milk ."
).split()


def show_links(label: str, links: np.ndarray) -> None:
    pairs = [f"{t}->{a}" for t, a in enumerate(links) if a != NULL]
    print(f"  {label}: {' '.join(pairs) if pairs else '(none)'}")


def main():
    doc = TokenizedDocument(PASSAGE)
    lexicon = {"fred", "mary", "milk", "park", "school"}
    clusters = exact_match_annotator(doc, lexicon)
    print(f"passage ({len(PASSAGE)} tokens): {' '.join(PASSAGE)}")
    print(f"exact-match clusters (2+ occurrences only): {clusters.to_spans()}")

    # keep only entities tied to the question: candidates plus the head
    clusters = filter_clusters(clusters, doc, {"park", "school"}, "milk")
    print(f"filtered to candidates+head: {clusters.to_spans()}")

    clusters = cap_clusters(clusters, 2)
    print(f"capped to the 2 largest: {clusters.to_spans()}")

    membership = token_membership(clusters, len(PASSAGE))
    amap = antecedents_from_membership(membership)
    print("\nantecedent links (token -> most recent same-cluster token):")
    show_links("forward ", amap.forward)
    show_links("backward", amap.backward)

    half = corrupt_annotations(amap, "remove-fraction", 0.5, seed=0)
    gone = corrupt_annotations(amap, "remove-fraction", 1.0, seed=0)
    shuffled = corrupt_annotations(amap, "randomize", 1.0, seed=0)
    print("\ncorruption modes:")
    show_links("remove 50%", half.forward)
    show_links("remove all", gone.forward)
    show_links("randomize ", shuffled.forward)
    # randomize keeps every link but points it at an arbitrary earlier token
    kept = (amap.forward != NULL) == (shuffled.forward != NULL)
    print(f"randomize preserves which tokens have links: {bool(kept.all())}")


if __name__ == "__main__":
    main()
