"""From annotation votes to exemplar sets.

Simulates raters choosing wheels for a keyword, then applies the
tie-inclusive top-percent rule and shows how ties grow the set.
"""

import numpy as np

from wheelgen.exemplars import (
    AnnotationTask,
    VoteMatrix,
    aggregate_top_percent,
    record_vote,
)

rng = np.random.default_rng(7)
wheel_ids = [f"w{i:03d}" for i in range(100)]
task = AnnotationTask(keyword="dynamic", candidate_wheel_ids=tuple(wheel_ids),
                      selections_per_rater=10)

# 25 raters, each with a noisy preference for the first 20 wheels
votes = VoteMatrix("dynamic")
for r in range(25):
    weights = np.ones(100)
    weights[:20] = 4.0
    picks = rng.choice(100, size=10, replace=False, p=weights / weights.sum())
    votes = record_vote(task, votes, f"rater-{r}", [wheel_ids[i] for i in picks])

print(f"{votes.rater_count} raters, {sum(votes.counts.values())} total votes")

exemplars = aggregate_top_percent(votes, percentile=0.05)
print(f"top-5% set ({len(exemplars.wheel_ids)} wheels, threshold "
      f"{exemplars.threshold_votes} votes): {exemplars.wheel_ids}")

# ties at the threshold expand the set beyond the nominal count
tied = VoteMatrix("demo", counts={**{f"t{i}": 6 for i in range(5)},
                                  **{f"x{i}": 1 for i in range(55)}})
out = aggregate_top_percent(tied, percentile=0.05)
print(f"tie-rich example: nominal ceil(0.05*60)=3 but the set has "
      f"{len(out.wheel_ids)} members: {out.wheel_ids}")
