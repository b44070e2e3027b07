"""Check the analytic engine against simulation, then trust the seeds.

Small worlds are enumerated exactly (every joint fate and latency
outcome). Larger ones run a vectorized Monte Carlo whose draws are keyed
by (seed, site, trial block), so results replay bit for bit regardless of
chunking.

Run from the repository root:  python3 demos/04_simulation_oracle.py
"""
import pathlib

from emac import (SimConfig, availability_interval, load_model_document,
                  load_spec_document, merge_domains, replay_determinism, run)

ROOT = pathlib.Path(__file__).resolve().parent.parent
spec = load_spec_document((ROOT / "fixtures" / "checkout.yaml").read_bytes())
model = load_model_document((ROOT / "fixtures" / "model.yaml").read_bytes())
domains = merge_domains(spec.domains, model.domains)
iv = availability_interval(spec.expression, model, domains)

print("exact enumeration against the analytic interval")
print("-" * 64)
print(f"compiled interval [{iv.lo:.12f}, {iv.hi:.12f}]")
for coupling in ("independent", "comonotone"):
    res = run(spec.expression, model, domains,
              SimConfig(trials=1, seed=0, mode="enumerate",
                        coupling=coupling, percentiles=(0.5, 0.99)))
    inside = iv.lo - 1e-12 <= res.availability <= iv.hi + 1e-12
    print(f"{coupling:>12}: enumerated {res.availability:.12f}   "
          f"inside: {inside}")
# enumeration evaluates point estimates (p_hit = 0.80, point deadline
# readings); the endpoints additionally swing interval-valued branch
# probabilities and read deadline evidence conservatively, so exact values
# land strictly inside the compiled interval

print("\nmillion-trial Monte Carlo, both coupling assumptions")
print("-" * 64)
for coupling in ("independent", "comonotone"):
    res = run(spec.expression, model, domains,
              SimConfig(trials=1_000_000, seed=2024, coupling=coupling,
                        percentiles=(0.5, 0.99)))
    print(f"{coupling:>12}: availability {res.availability:.6f} "
          f"+/- {res.std_error:.2e}, p50 {res.quantiles[0.5]:g}ms, "
          f"p99 {res.quantiles[0.99]:g}ms")
    print(f"{'':>12}  deadline hit rate at root.2: "
          f"{res.timeout_q['root.2']:.6f}")

print("\nsame seed, same numbers; different seed, different stream")
print("-" * 64)
cfg = SimConfig(trials=200_000, seed=7, percentiles=(0.99,))
print("replay identical:",
      replay_determinism(spec.expression, model, domains, cfg))
a = run(spec.expression, model, domains, cfg)
b = run(spec.expression, model, domains,
        SimConfig(trials=200_000, seed=8, percentiles=(0.99,)))
print(f"seed 7 availability {a.availability:.6f}, "
      f"seed 8 availability {b.availability:.6f}")
