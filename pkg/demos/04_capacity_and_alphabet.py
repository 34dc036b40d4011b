"""Capacity profiles: per-lattice conditioning losses and alphabet effects.

Uses a small stego variance (about half a quantization step at QF 100) so
the discretized entropy reflects the conditioning structure instead of
alphabet folding.
"""

import numpy as np

from jpegns import EmbedConfig, SensorParams, SynthSpec, capacity_map, synthesize_raw

params = SensorParams(a1=0.0, b1=0.0, a2=5e-4, b2=-0.5)
spec = SynthSpec(kind="iid_gaussian", mu=2000.0, sigma=100.0,
                 width=256, height=256, seed=33)
raw = synthesize_raw(spec, params)

print("== per-lattice capacity vs quality factor ==")
for qf in (100, 95):
    report = capacity_map(raw, EmbedConfig(qf=qf, K=5, key=7))
    print(f"QF {qf}: lattice means {np.round(report.per_lattice_mean, 4)} "
          f"bits/coefficient, total {report.bits_per_pixel:.4f} bpp")
print("Conditioning on already-embedded neighbors strictly reduces the")
print("entropy from the first to the fourth macro-lattice.")

print("\n== per-mode profile at QF 95 (first macro-lattice) ==")
report = capacity_map(raw, EmbedConfig(qf=95, K=5, key=7))
profile = report.per_lattice_mode[0].reshape(8, 8)
with np.printoptions(precision=2, suppress=True):
    print(profile)

print("\n== alphabet size sweep at QF 100 ==")
for k_range in (1, 2, 3, 5):
    report = capacity_map(raw, EmbedConfig(qf=100, K=k_range, key=7))
    print(f"K = {k_range}: {report.total_bits:10.0f} bits total "
          f"({report.bits_per_nzac:.3f} bits/nzAC)")
print("Folding beyond +-K merges tail mass, so capacity grows with K.")
