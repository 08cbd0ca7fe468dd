"""Power needed for a maximally entangling gate on a 15-ion chain, by gate time.

Short gates must push the drive spectrum through the dense mode band, so
the power climbs steeply once tau drops below a few tens of microseconds.
The low-infidelity F-matrix pulse buys back part of that cost.

    python3 demos/power_vs_gate_time.py
"""

from amfm import SynthesisRequest, preset, synthesize
from amfm.synthesis import fmatrix_scan

modes = preset("chain15")[1]
print(f"{'tau_us':>7} {'exact':>11} {'F-matrix':>11} {'ratio':>6}")
for tau_us in (30, 40, 60, 100, 150, 200):
    tau = tau_us * 1e-6
    exact = synthesize(SynthesisRequest(modes=modes, pair=(1, 11), tau=tau))
    req = SynthesisRequest(modes=modes, pair=(1, 11), tau=tau, protocol="fmatrix", L_cut=1)
    low_f = fmatrix_scan(req, [req.n_basis - 12])[0]
    print(f"{tau_us:7d} {exact.mean_square_power:11.3e} {low_f.mean_square_power:11.3e} "
          f"{exact.mean_square_power / low_f.mean_square_power:6.2f}")
