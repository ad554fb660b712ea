"""Turning user-study rankings into Plackett-Luce scores.

Each participant ranks the methods' results best first.  The score of a
method is its fitted probability of being ranked first.
"""

from lutharm import plackett_luce_scores

rankings = (
    [["ours", "harmonizer", "composite"]] * 14
    + [["harmonizer", "ours", "composite"]] * 7
    + [["ours", "composite", "harmonizer"]] * 3
    + [["composite", "harmonizer", "ours"]] * 1
)
for method, score in sorted(plackett_luce_scores(rankings).items(), key=lambda kv: -kv[1]):
    print(f"{method:<11} {score:.3f}")
