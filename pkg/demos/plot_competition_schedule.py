"""
Who labels the target sample?
=============================

Early on the teacher's pseudo-label wins whenever its confidence clears a
threshold that starts at 0.5.  The threshold climbs towards 1 as training
progresses, so later the teacher only wins by being more confident than the
student.  This script draws the threshold and replays a few decisions.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from tsc_uda.competition import REASONS, Schedule, compete_arrays, threshold

sched = Schedule(delta=10.0, total_steps=3000)
steps = np.arange(0, 3001, 10)
tp = np.array([threshold(int(s), sched) for s in steps])
print("threshold at start, middle, end:", tp[0], tp[len(tp) // 2], tp[-1])

# the same (teacher, student) confidence pair judged at three points in training
y1, p1 = np.array([0]), np.array([0.8])
y2, p2 = np.array([1]), np.array([0.9])
for s in (0, 300, 3000):
    chosen, reason = compete_arrays(y1, p1, y2, p2, threshold(s, sched))
    print(f"step {s:4d}: label {chosen[0]} ({REASONS[reason[0]].value})")

fig, ax = plt.subplots(figsize=(5, 3))
ax.plot(steps, tp)
ax.axhline(0.8, ls="--", c="gray", label="teacher confidence 0.8")
ax.set_xlabel("step")
ax.set_ylabel("teacher-priority threshold")
ax.legend()
fig.tight_layout()
fig.savefig("competition_threshold.svg")
