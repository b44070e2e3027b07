"""Compare two worlds before touching production.

Scenario A tightens the payment deadline in the journey definition to
chase lower tail latency. Scenario B swaps in degraded evidence: a payment
provider slipped, tails grew, and an incident review declared the queue
fate-shared with both providers. The report shows exactly which governed
numbers move and which way.

Run from the repository root:  python3 demos/06_what_if_analysis.py
"""
import dataclasses
import json
import pathlib

from emac import (load_model_document, load_spec_document, parse_expression,
                  whatif)

ROOT = pathlib.Path(__file__).resolve().parent.parent
spec = load_spec_document((ROOT / "fixtures" / "checkout.yaml").read_bytes())
model = load_model_document((ROOT / "fixtures" / "model.yaml").read_bytes())


def show(report):
    doc = report.to_doc()
    av = doc["availability"]
    print(f"  availability lo {av['lo']['before']} -> {av['lo']['after']} "
          f"(delta {av['lo']['delta']:+g})")
    print(f"  availability hi {av['hi']['before']} -> {av['hi']['after']} "
          f"(delta {av['hi']['delta']:+g})")
    lat = doc["latency"]
    print(f"  p{int(100 * lat['percentile'])} upper "
          f"{lat['upper']['before']} -> {lat['upper']['after']} "
          f"(delta {lat['upper']['delta']:+g})")
    for path, q in doc["timeoutQ"].items():
        print(f"  deadline SLI {path}: lo {q['lo']['before']} -> "
              f"{q['lo']['after']}, hi {q['hi']['before']} -> "
              f"{q['hi']['after']}")
    v = doc["verdict"]
    print(f"  verdict {v['before']} -> {v['after']}"
          f"{'  (CHANGED)' if v['changed'] else ''}")
    if doc["sensitivityRankChanges"]:
        moves = ", ".join(f"{c['name']} #{c['before']}->#{c['after']}"
                          for c in doc["sensitivityRankChanges"])
        print(f"  sensitivity rank moves: {moves}")


print("scenario A: widen the payment deadline 200ms -> 300ms")
print("-" * 64)
widened = dataclasses.replace(spec, expression=parse_expression(
    "Series(Frontend, Cond(p_hit; Cache, Catalog), "
    "Timeout(300ms; Race(PayA, PayB), Queue))"))
show(whatif(spec, model, widened, model))

print("\nscenario B: degraded payment evidence, wider failure domain")
print("-" * 64)
degraded = load_model_document(
    (ROOT / "demos" / "data" / "checkout_degraded.yaml").read_bytes())
report = whatif(spec, model, spec, degraded)
show(report)

print("\nfull report document (scenario B), first lines")
print("-" * 64)
text = json.dumps(report.to_doc(), indent=2)
print("\n".join(text.splitlines()[:16]))
