"""
Distilling a sampler with rejection rounds
==========================================

Fit the simple baseline sampler on a collision-heavy dataset, then run
rounds of sample -> filter by average cuboid IoU -> refit, watching the
acceptance rate climb.
"""

from cuboidlayout.metrics import nirate
from cuboidlayout.sampling import RejectionConfig, fit_baseline, rejection_loop
from cuboidlayout.synthetic import make_dataset

data = make_dataset(200, collision_fraction=0.6, seed=0)
floors = [s.floor for s in data[:20]]
model = fit_baseline(data)
print(f"fitted {len(model.classes)} classes; dataset NIRate {nirate(data)}")

config = RejectionConfig(k_candidates=300, t_threshold=0.001, rounds=3)
model, reports, distilled = rejection_loop(model, floors, config, seed=0, dataset=data)
for r in reports:
    print(f"round {r['round']}: accepted {r['n_accepted']}/{r['n_candidates']} "
          f"({r['acceptance_rate']:.2f}), mean CIoU {r['mean_ciou']:.2f}, distilled {r['distilled_size']}")

new = distilled[: len(distilled) - len(data)]
print(f"{len(new)} accepted scenes, NIRate {nirate(new)}")
