"""Train harvesters with and without a cleaning contract and compare the orchards.

    python demos/cleanup_contract.py [seed] [episodes]

Without cleaners nobody clears the river, waste builds up and apples stop
growing. With a 5% tax paid out to five cleaners, the orchard survives.
"""

import sys

from contract_bo import cleanup, marl
from contract_bo.core import DesignPoint

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
episodes = int(sys.argv[2]) if len(sys.argv) > 2 else 5000
env = cleanup.desk_config()
tc = marl.TrainConfig(episodes=episodes)

print(cleanup.render(env, cleanup.reset(env, 5, 5, seed)), "\n")

base = marl.train(DesignPoint(0.0, 0), env, tc, seed)
deal = marl.train(DesignPoint(0.05, 5), env, tc, seed)

for name, rep in (("no contract", base), ("alpha=0.05, 5 cleaners", deal)):
    print(f"{name:>24}: welfare {rep.welfare:7.1f}  apples@50 {rep.apples_at(50):5.1f}"
          f"  apples@150 {rep.apples_at(150):5.1f}  waste@150 {rep.waste_timeline[149]:.2f}")

rec = marl.evaluate_contract(deal, base.harvester_returns)
print("\nharvester gain over baseline:", [round(s, 2) for s in rec.ir_slack_baseline])
print("cleaner returns:", [round(r, 2) for r in deal.cleaner_returns])
print("contract feasible:", rec.feasible)
