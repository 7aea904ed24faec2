"""
Poisoning the aggregate
=======================

Fake users skip the randomiser and send crafted reports. A targeted
attack (MGA) inflates a few chosen items; an untargeted one (Manip)
just distorts the histogram.
"""

import numpy as np

from ldprecover import GRR, OUE, AttackSpec, ItemDomain, poison, synthesize_zipf
from ldprecover.attack import malicious_count

data = synthesize_zipf(ItemDomain(50), 100_000, s=1.1, seed=1)
m = malicious_count(0.05, data.n)
targets = (7, 21, 33)
print(f"n={data.n}, m={m} fake users, targets {targets}")

for proto in (GRR(0.5, 50), OUE(0.5, 50)):
    ps = poison(data, proto, AttackSpec("mga", m, targets=targets), seed=1)
    genuine = proto.aggregate(ps.genuine).frequencies
    poisoned = proto.aggregate(ps.combined()).frequencies
    gain = poisoned[list(targets)] - genuine[list(targets)]
    print(f"{proto.name}: frequency gain per target {np.round(gain, 3)}")

# the poisoned aggregate is an exact mix of the two parts
grr = GRR(0.5, 50)
ps = poison(data, grr, AttackSpec("manip", m, h_fraction=0.1), seed=2)
c = grr.support_counts
assert np.array_equal(c(ps.combined()), c(ps.genuine) + c(ps.malicious))
print("mixing identity holds on support counts")
