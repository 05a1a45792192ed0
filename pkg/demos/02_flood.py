"""Run the bundled flood scenario and print measured against predicted values.

Run: python demos/02_flood.py [seed]
"""

import sys

from hacss import compare, run
from hacss.scenario import bundled, load

sc = load(bundled("flood-demo"))
if len(sys.argv) > 1:
    sc = sc.with_seed(int(sys.argv[1]))
report = run(sc)

m = report.measured
print(f"scenario {sc.name}: I={sc.I}, s={sc.s}, {sc.duration} ticks, seed {sc.seed}")
print(f"honest requests {m['N_c']}, attacker requests {m['N_f']}")
print(f"attacker ACC datagrams with a live header {m['N_f_valid']}, opened {m['N_f_expected']}")
print(f"deliveries {len(report.events['deliveries'])}, unexpected opens {report.events['gateway_opens_unexpected']}")
print()
print("per attacker model (injected, units):")
for label in sorted(report.attacker_classes):
    stats = report.classes[label]
    print(f"  {label:28s} {stats['injected']:7d} {stats['units']:8d}")
print()
print(compare(report).to_csv(), end="")
