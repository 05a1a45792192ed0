"""Attacker cost as the number of receive endpoints grows.

A replayer resends captured honest datagrams, so every replay carries a header
the server really announced. Only the endpoint the packet was assigned to
opens it; the rest drop it from the header. The opened share should track 1/I.

Run: python demos/03_endpoint_scaling.py [seeds]
"""

import sys

from hacss import compare, run
from hacss.scenario import from_dict

seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 5

print(" I  opened share   1/I   attacker units  predicted")
for I in (1, 2, 4, 8):  # noqa: E741
    share = units = pred = 0.0
    for seed in range(seeds):
        report = run(
            from_dict(
                {
                    "I": I,
                    "s": 1200,
                    "duration": 320,
                    "seed": seed,
                    "engine": {"max_age": 1000},
                    "clients": [{"count": 1, "transfers": [{"size": 200 * 1024, "interval": 2}]}],
                    "attackers": [{"model": "REPLAYER", "rate": 5, "start": 10, "stop": 310}],
                }
            )
        )
        m = report.measured
        share += m["N_f_expected"] / m["N_f_valid"] / seeds
        units += m["attacker_expected_units"] / seeds
        pred += float(compare(report).row("attacker_expected_units").predicted) / seeds
    print(f"{I:2d}  {share:12.4f}  {1 / I:5.3f}  {units:14.0f}  {pred:9.0f}")
