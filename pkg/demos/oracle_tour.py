"""A tour of the structural oracles.

Each check prints its statistic next to the threshold it is held to.  The
convolution-gap corpus is the one place where the grid cannot settle the
question asked of it: the lower bound holds comfortably, but near-equal
members are not all peakon shaped.

Run with ``python3 demos/oracle_tour.py``.
"""

from novikov_lab.experiments import default_config, lemma_oracle_checks
from novikov_lab.nonlocal_ops import psi_ratio_bound

print(f"max |Psi'''| / Psi' on [-100, 100]: {psi_ratio_bound():.5f} (bound 0.1)\n")

checks, _ = lemma_oracle_checks(default_config("lemma-oracles"))
for c in checks:
    mark = "ok  " if c.passed else "FAIL"
    print(f"{mark} {c.name:38s} {c.statistic:12.4g}  {c.relation} {c.threshold:.4g}")
