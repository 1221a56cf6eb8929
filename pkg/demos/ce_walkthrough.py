"""The two-thread example end to end.

Thread ``th`` counts the secret ``h`` down to zero and then writes ``l := 2``;
thread ``th'`` writes ``l := 1``. Under a fair coin scheduler, the final value
of ``l`` leaks ``h``. The property asks whether some scheduler, together
with stutter-schedulers that slow one run down, makes the output
distributions of the runs with h=0 and h=1 identical.

The script encodes the question, asks z3, and replays the witness through
the exact oracle. Requires ``z3`` on PATH.

    python demos/ce_walkthrough.py
"""

from fractions import Fraction

from ahmc import build_ce, check_instantiated, encode
from ahmc.solver import Verdict, run_solver

fx = build_ce(0, 1)
print(f"model: {fx.size()[0]} states, {fx.size()[1]} transitions")
print(f"formula: {fx.formula_text}\n")

m = 2
system = encode(fx.mdp, fx.formula, m)
print("encoding:", system.stats)

result = run_solver(system, timeout=600)
print(f"solver: {result.verdict.value} in {result.wall_time:.2f}s")
if result.verdict is not Verdict.SAT:
    raise SystemExit("no witness to show")

w = result.witness
print("\nscheduler:")
for (A, a), p in sorted(w.scheduler_probs.items()):
    print(f"  {{{','.join(A)}}}: {a} with probability {p}")
print("stutter durations (nonzero):")
for (i, s, a), j in sorted(w.stutter_durations.items()):
    if j:
        print(f"  run {i} waits {j} step(s) in {s} before {a}")

ok = check_instantiated(fx.mdp, fx.formula, w.scheduler(), w.stutterers(2, m), tol=Fraction(1, 10 ** 6))
print(f"\noracle replay of the witness: {'holds' if ok else 'FAILS'}")
