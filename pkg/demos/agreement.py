"""Cross-check the SMT route against explicit enumeration on random instances.

Both routes answer the same question for small single-action models with
two experiments and m = 2. Disagreements would point at an encoding bug.
Requires ``z3`` on PATH.

    python demos/agreement.py [seed] [count]
"""

import sys
import time

from ahmc import SchedulerDomain, check_by_enumeration, check_smt
from ahmc.formula import node_text
from ahmc.randgen import random_instances

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
count = int(sys.argv[2]) if len(sys.argv) > 2 else 20

agree = 0
t0 = time.perf_counter()
for idx, (mdp, f) in enumerate(random_instances(seed, count)):
    oracle = check_by_enumeration(mdp, f, 2, SchedulerDomain.SINGLE_ACTION).holds
    smt = check_smt(mdp, f, 2, timeout=120)
    mark = "ok " if smt.holds is oracle else "BAD"
    agree += smt.holds is oracle
    print(f"{mark} #{idx:2d} |S|={len(mdp.states)} oracle={oracle!s:5} smt={smt.verdict.value:7} {node_text(f.body)}")
print(f"\n{agree}/{count} agree in {time.perf_counter() - t0:.1f}s")
