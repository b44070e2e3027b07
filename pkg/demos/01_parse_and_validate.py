"""Parse the journey script form, inspect the tree, and validate bindings.

Run from the repository root:  python3 demos/01_parse_and_validate.py
"""
import pathlib

from emac import (JourneySpec, Leaf, leaf_names, load_model_document,
                  parse_script, pretty_print, validate_spec, walk)

ROOT = pathlib.Path(__file__).resolve().parent.parent
script_text = (ROOT / "fixtures" / "checkout.script").read_text()

print("input script")
print("-" * 60)
print(script_text)

parsed = parse_script(script_text)
print(f"journey name: {parsed.name}")
print(f"objective:    {parsed.objective}")

print("\noperator tree (path, node)")
print("-" * 60)
for path, node in walk(parsed.expression):
    kind = "leaf" if isinstance(node, Leaf) else type(node).__name__
    label = node.name if isinstance(node, Leaf) else ""
    print(f"  {path:<14} {kind} {label}")
print(f"leaves: {sorted(leaf_names(parsed.expression))}")

print("\ncanonical pretty-printed form")
print("-" * 60)
print(pretty_print(parsed.expression))

# Validation cross-checks the expression against the evidence model: every
# leaf and named branch probability must be bound, quorums must be sane.
model = load_model_document((ROOT / "fixtures" / "model.yaml").read_bytes())
spec = JourneySpec(parsed.name, parsed.expression, parsed.objective)
diags = validate_spec(spec, model)
print("\nvalidation against the evidence model")
print("-" * 60)
print("diagnostics:", diags if diags else "clean")

broken = parse_script("checkout := Series(Frontend, Mystery).\n"
                      "objective: A >= 99.9")
diags = validate_spec(
    JourneySpec(broken.name, broken.expression, broken.objective), model)
print("\nsame check with an unbound leaf")
print("-" * 60)
for d in diags:
    print(f"  {d.severity} {d.code}: {d.message}")
