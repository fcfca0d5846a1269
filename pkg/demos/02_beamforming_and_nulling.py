"""How one coordination bit silences a cross-operator interferer.

Scores the fixed toy association under two coordination regimes:
  (a) every BS only knows its own served UEs' effective channels;
  (b) additionally, operator 1's BS 1 acquires UE 6's effective channel
      and nulls it in its regularized zero-forcing precoder.
The interference decomposition of UE 6 (intra-cell / inter-cell /
inter-operator) shows the third term collapsing.

Run: python demos/02_beamforming_and_nulling.py
"""

from mmwshare import SimConfig, build_toy_topology
from mmwshare.interference import long_term_report
from mmwshare.scenarios import FOCUS_UE, toy_scenario

config = SimConfig()
topo = build_toy_topology(config)
K = 100

print(f"averaging over {K} channel realizations, "
      f"({config.n_bs_antennas},{config.n_ue_antennas}) antennas\n")

reports = {}
for which in ("a", "b"):
    A, C = toy_scenario(topo, which)
    reports[which] = long_term_report(topo, config, A, C, seed=0,
                                      num_realizations=K)

for which, rep in reports.items():
    i1, i2, i3 = rep.normalized_interference(FOCUS_UE)
    extra = "" if which == "a" else "  <- BS 1 now nulls UE 6"
    print(f"scenario ({which}): UE 6 rate {rep.rate_bps[FOCUS_UE] / 1e9:6.3f} Gbit/s,"
          f"  I1/rx {i1:.3f}  I2/rx {i2:.3f}  I3/rx {i3:.3f}{extra}")

ra = reports["a"].rate_bps[FOCUS_UE]
rb = reports["b"].rate_bps[FOCUS_UE]
i3a = reports["a"].normalized_interference(FOCUS_UE)[2]
i3b = reports["b"].normalized_interference(FOCUS_UE)[2]
print(f"\nsingle-bit effect: UE 6 rate +{100 * (rb - ra) / ra:.0f}%, "
      f"inter-operator interference / {i3a / i3b:.0f}")

print("\nwhy it works: BS 1 adds UE 6's combiner-projected channel as an "
      "extra row of its effective-channel matrix; the regularized "
      "pseudo-inverse then steers BS 1's transmit vectors into that row's "
      "null space, at the price of one cross-operator acquisition penalty.")
