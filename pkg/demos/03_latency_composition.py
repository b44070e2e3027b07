"""Compose per-dependency latency histograms into journey percentiles.

Evidence arrives as cumulative histograms. Each can be read two ways:
point (bucket midpoints, a best estimate) or conservative (upper edges,
never optimistic). Composition then mirrors the operator tree: chains
convolve, fan-outs take the max, hedges the min of the racers, deadlines
mix the truncated body with the shifted fallback.

Run from the repository root:  python3 demos/03_latency_composition.py
"""
import pathlib

from emac import (build_q_values, compose, from_histogram,
                  load_model_document, load_spec_document, merge_domains,
                  quantile)

ROOT = pathlib.Path(__file__).resolve().parent.parent
spec = load_spec_document((ROOT / "fixtures" / "checkout.yaml").read_bytes())
model = load_model_document((ROOT / "fixtures" / "model.yaml").read_bytes())
domains = merge_domains(spec.domains, model.domains)


def show(label, dist):
    pairs = ", ".join(f"{v:g}ms:{m:.4f}" for v, m in dist.support)
    print(f"  {label}: {pairs}")


ev = model.leaves["Catalog"].latency
print("one histogram, two readings (Catalog)")
print("-" * 60)
show("point       ", from_histogram(ev, "point"))
show("conservative", from_histogram(ev, "conservative"))

print("\njourney composition in both modes")
print("-" * 60)
for mode in ("optimistic", "pessimistic"):
    dist, q_values = compose(spec.expression, model, mode, domains)
    q99 = quantile(dist, 0.99, delta=spec.policy.dkw_delta)
    print(f"{mode}: support size {len(dist.values)}, "
          f"p99 point {q99.point:g}ms, upper {q99.upper:g}ms "
          f"(sampling band from n={dist.samples})")

print("\ndeadline SLI for the payment hedge (200ms budget)")
print("-" * 60)
q = build_q_values(spec.expression, model, domains)["root.2"]
print(f"  q in [{q.lo:.6f}, {q.hi:.6f}]")
print(f"  body CDF at 200ms: conservative {q.cdf_lo:.6f}, "
      f"point {q.cdf_hi:.6f}")

# the objective threshold is judged against the conservative upper bound
dist, _ = compose(spec.expression, model, "pessimistic", domains)
q99 = quantile(dist, 0.99, delta=spec.policy.dkw_delta)
thr = spec.objective.latency_threshold_ms
print(f"\nobjective p99 < {thr:g}ms, compiled upper bound {q99.upper:g}ms: "
      f"{'meets' if q99.upper <= thr else 'misses'}")
