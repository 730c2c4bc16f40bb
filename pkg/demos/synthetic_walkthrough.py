"""One cPMES run on a synthetic instance, printed round by round.

    python demos/synthetic_walkthrough.py [seed]

The instance has a known optimum, so every step can be scored against it.
"""

import sys

from contract_bo import cpmes, synthetic

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
inst = synthetic.generate(seed)
best, value = inst.optimum
print(f"instance {seed}: {len(inst.lattice)} designs, {inst.feasible_fraction:.0%} feasible")
print(f"true optimum alpha={best.alpha} n_added={best.n_added} welfare={value:.1f}\n")

config = cpmes.ProblemConfig(seed=seed, budget=12)
trace = cpmes.run(config, lambda d: synthetic.evaluate(inst, d))

print("round  alpha  n_added  welfare   feasible  regret so far")
for i, (rec, rnd) in enumerate(zip(trace.records, trace.rounds)):
    tag = "prior" if i < trace.n_priors else f"{rnd:5d}"
    found = trace.best_feasible(max(0, i + 1 - trace.n_priors))
    regret = value - found if found is not None else float("nan")
    print(f"{tag:>5}  {rec.design.alpha:5.2f}  {rec.design.n_added:7d}  {rec.principal_objective:8.1f}"
          f"  {str(rec.feasible):>8}  {regret:8.1f}")

print("\nregret at budgets 4..12:", [round(r, 1) for r in cpmes.compute_regret(trace, value, (4, 8, 12))])
