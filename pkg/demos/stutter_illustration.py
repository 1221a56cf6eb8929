"""How a counting stutter-scheduler reshapes a chain.

In the four-state model, s0 picks ``alpha`` (to s1 or s2) or ``beta`` (to
s3). The scheduler takes ``alpha`` with probability p. The stutter-scheduler
makes ``alpha`` wait two steps in s0 before it fires, so every attempt to
use ``alpha`` is a fresh coin flip and s3 becomes much more likely.

    python demos/stutter_illustration.py
"""

from fractions import Fraction

from ahmc import CountingStutterScheduler, Mdp, MemorylessScheduler, induce_dtmc, until_probability

mdp = Mdp.build(
    ["s0", "s1", "s2", "s3"],
    {"s1": ["a"], "s3": ["end"]},
    {
        ("s0", "alpha"): {"s1": Fraction(1, 2), "s2": Fraction(1, 2)},
        ("s0", "beta"): {"s3": 1},
        ("s1", "loop"): {"s1": 1},
        ("s2", "loop"): {"s2": 1},
        ("s3", "loop"): {"s3": 1},
    },
)

wait_two = CountingStutterScheduler(3, {("s0", "alpha"): 2})
no_wait = CountingStutterScheduler.zero(3)

for p in (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(1)):
    sched = MemorylessScheduler({("alpha", "beta"): {"alpha": p, "beta": 1 - p}, ("loop",): {"loop": Fraction(1)}})
    chain = induce_dtmc(mdp, sched, wait_two, prune_from=["s0"])
    print(f"p = {p}")
    for src in [st for st in [("s0", 0), ("s0", 1), ("s0", 2)] if st in chain.trans]:
        row = ", ".join(f"{t[0]},{t[1]}: {q}" for t, q in sorted(chain.trans[src].items()))
        print(f"  ({src[0]},{src[1]}) -> {row}")
    reach = until_probability(chain, ("s0", 0), chain.states, [s for s in chain.states if s[0] == "s3"])
    plain = induce_dtmc(mdp, sched, no_wait, prune_from=["s0"])
    base = until_probability(plain, ("s0", 0), plain.states, [s for s in plain.states if s[0] == "s3"])
    print(f"  P(reach s3) with waiting = {reach}   (1 - p^3 = {1 - p ** 3}), without = {base}")
