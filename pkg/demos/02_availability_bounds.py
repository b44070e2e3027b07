"""Bracket journey availability between independence and shared-fate floors.

The same tree is evaluated twice: once assuming every dependency fails on
its own, once assuming declared fate-sharing groups fail together. The gap
between the two endpoints is the price of unknown correlation.

Run from the repository root:  python3 demos/02_availability_bounds.py
"""
import pathlib

from emac import (availability_interval, load_model_document,
                  load_spec_document, merge_domains, sensitivity,
                  symbolic_availability)

ROOT = pathlib.Path(__file__).resolve().parent.parent
spec = load_spec_document((ROOT / "fixtures" / "checkout.yaml").read_bytes())
model = load_model_document((ROOT / "fixtures" / "model.yaml").read_bytes())
domains = merge_domains(spec.domains, model.domains)

iv = availability_interval(spec.expression, model, domains)
print(f"journey: {spec.name}   target: {spec.objective.availability_target}")
print(f"availability interval: [{iv.lo:.12f}, {iv.hi:.12f}]")
print(f"  lower assumes:  {iv.lo_assumption}")
print(f"  upper assumes:  {iv.hi_assumption}")
print(f"  width:          {iv.width:.3e}")
for name, lo, hi in iv.prob_endpoints:
    print(f"  branch prob {name}: lower endpoint uses {lo}, upper uses {hi}")

# what if the payment providers also shared fate with the queue?
wider = dict(domains)
wider["payments"] = frozenset(domains["payments"]) | {"Queue"}
iv_wider = availability_interval(spec.expression, model, wider)
print("\nwider blast radius (payments + Queue share fate)")
print(f"  pessimistic floor drops {iv.lo:.12f} -> {iv_wider.lo:.12f}")
print(f"  independence ceiling unchanged at {iv_wider.hi:.12f}")

print("\nwhere the budget goes (pessimistic sensitivity)")
print("-" * 60)
report = sensitivity(spec.expression, model, domains)
for e in report.entries[:4]:
    print(f"  #{e.rank} {e.kind} {e.name}: journey gains {e.delta:.3e} "
          f"if perfect")
print(f"dominant contributor: {report.dominant}")

print("\nthe same bounds as inspectable expressions")
print("-" * 60)
for mode in ("optimistic", "pessimistic"):
    sym = symbolic_availability(spec.expression, domains, mode, model=model)
    print(f"{mode}:")
    print(f"  {sym.to_text()}")
    if sym.notes:
        print(f"  embedded constants: {', '.join(sym.notes)}")
