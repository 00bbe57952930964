"""
The saddle-focus of Lorenz-84
=============================

"""

# load the published constants; the field is integrated in reversed time,
# so the equilibrium has one unstable real and a stable complex pair
from pathlib import Path

from homoclinic.driver import load_config, run_pipeline

root = Path(__file__).resolve().parents[1]
cfg = load_config(root / "configs" / "lorenz84_published.json")
print("G in", cfg.theta)

pipe = run_pipeline(cfg, upto="eigen")
print("equilibrium box:")
print(pipe.artifacts["fixed_point"])

for e in pipe.artifacts["eigen"]:
    if e.is_real:
        print("real eigenvalue     ", e.lambda_re)
    else:
        print("complex pair, real  ", e.lambda_re)
        print("complex pair, imag  ", e.lambda_im)

# negative saddle quantity: the orbit lives in the simple Shil'nikov regime
sq = pipe.artifacts["saddle_quantity"]
print("lambda_u + Re lambda_s in", sq)
print("stage verdicts:", {k: v.value for k, v in pipe.verdicts.items()})
