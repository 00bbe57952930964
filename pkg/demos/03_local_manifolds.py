"""
Which Lipschitz constants can be certified?
===========================================

"""

# the rate conditions trade the cross terms ||df_y/dx|| / L against the
# diagonal rates, so L can be neither too small nor too large
from pathlib import Path

from homoclinic.driver import load_config
from homoclinic.manifolds import SplitBlock, check_cone_conditions, check_isolating_block, check_rate_conditions

root = Path(__file__).resolve().parents[1]
cfg = load_config(root / "configs" / "lorenz84.json")
fl = cfg.field().in_chart(cfg.chart())
fs = fl.reverse_time()
block = SplitBlock.for_field(fl, cfg.R, cfg.theta)

print("isolating block:", check_isolating_block(fl, block).verdict.value)

print("\nunstable graph, sweep of L_u")
for L in [1e-6, 1e-5, 1e-4, 1e-3, 1e-1, 10.0]:
    rc = check_rate_conditions(fl, block, L, cfg.subdivision)
    print(f"  L_u={L:<8g} mu1<={float(rc.mu1.hi):+.4f}  xi>={float(rc.xi.lo):+.4f}  {rc.verdict.value}")

# cone conditions bound the slope of the graph in the parameter by 1/M
print("\nunstable graph, sweep of M_u")
for M in [0.5, 2.0, 100.0, 2000.0]:
    cc = check_cone_conditions(fl, block, M, cfg.subdivision)
    print(f"  M_u={M:<8g} mu(M)<={float(cc.mu_M.hi):+.4f}  {cc.verdict.value}")

sblock = SplitBlock.for_field(fs, cfg.R, cfg.theta)
print("\nstable graph, sweep of M_s")
for M in [10.0, 100.0, 500.0]:
    cc = check_cone_conditions(fs, sblock, M, cfg.subdivision)
    print(f"  M_s={M:<8g} mu(M)<={float(cc.mu_M.hi):+.4f}  {cc.verdict.value}")
