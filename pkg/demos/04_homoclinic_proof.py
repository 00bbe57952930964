"""
A validated homoclinic orbit
============================

"""

# full pipeline with constants that pass every local check (about half a minute)
import tempfile
from pathlib import Path

from homoclinic.driver import export_figures, load_config, recheck_certificate, run_pipeline, write_certificate

root = Path(__file__).resolve().parents[1]
cfg = load_config(root / "configs" / "lorenz84.json")
pipe = run_pipeline(cfg, log=print)

res = pipe.artifacts["shooting"]
print("h(G_l) in", res.h_left)
print("h(G_r) in", res.h_right)
print("h'     in", res.h_prime)
print("existence:", res.existence, " uniqueness:", res.uniqueness)
print("scope:", res.scope)

# the certificate stores every interval; recheck re-derives the verdicts
out = Path(tempfile.mkdtemp())
write_certificate(pipe.certificate(), out / "proof.cert")
print("recheck:", recheck_certificate(out / "proof.cert").ok)

for f in export_figures(pipe, out):
    print("wrote", f)
