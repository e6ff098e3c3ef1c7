"""Walk through the channel model: fading draws, time correlation, path
loss and imperfect-CSI views.

Run:  python3 demos/01_channel_model.py
"""

import numpy as np

from chdlink import (ChannelParams, CsiErrorParams, Topology, apply_path_loss,
                     corrupt_csi, draw_iid, evolve, slot_channels)

rng = np.random.default_rng(7)

# --- small-scale fading ----------------------------------------------------
# Every link coefficient is circularly-symmetric complex Gaussian.  With
# sigma2 = 1 the per-entry variance is 1 (Rayleigh-magnitude fading).
g = draw_iid((100_000,), sigma2=1.0, rng=rng)
print(f"fading entries: mean modulus {abs(g.mean()):.4f}, variance {np.var(g):.4f}")

# --- time correlation ------------------------------------------------------
# Hovering platforms change slowly: each slot mixes the previous matrix with
# a fresh draw, rho controlling the memory.  rho=0 is block fading, rho=1
# freezes the channel.
for rho in (0.0, 0.95, 1.0):
    nxt = evolve(g, rho, rng)
    x = np.concatenate([g.real, g.imag])
    y = np.concatenate([nxt.real, nxt.imag])
    corr = np.corrcoef(x, y)[0, 1]
    print(f"rho={rho:4.2f}: lag-1 correlation {corr:+.4f}")

# --- path loss --------------------------------------------------------------
# Deterministic distance attenuation scales every entry by sqrt(gamma)*d^-xi,
# so squared norms shrink by gamma*d^(-2 xi) exactly.
m = draw_iid((4, 4), 1.0, rng)
scaled = apply_path_loss(m, gamma=1.0, xi=2.0, d=10.0)
ratio = np.sum(np.abs(scaled) ** 2) / np.sum(np.abs(m) ** 2)
print(f"path loss at d=10, xi=2: squared-norm ratio {ratio:.3e} (expect 1e-4)")

# --- a whole slot of network channels ---------------------------------------
# K cluster-to-relay uplink matrices stack U square blocks; each relay's
# downlink holds V transmit blocks toward both sources of every cluster.
topo = Topology(K=5, N=10, Ms=2, U=2, V=2)
params = ChannelParams(rho=0.95)
chans = slot_channels(None, params, topo, rng, rng)
print(f"uplink tensor {chans.uplink.shape}, downlink tensor {chans.downlink.shape}")
chans = slot_channels(chans, params, topo, rng, rng)
print(f"slot index after one evolution: {chans.slot_index}")

# --- estimation error --------------------------------------------------------
# Receivers see H + He with He variance beta * E^-alpha; the broadcast phase
# uses half the source energy, doubling the error variance at alpha = 1.
err = CsiErrorParams(beta=0.5, alpha=1.0, enabled=True)
es = 4.0
up_hat = corrupt_csi(chans.uplink, err, es, rng)
dn_hat = corrupt_csi(chans.downlink, err, es / 2, rng)
print(f"CSI error variance uplink {np.var(up_hat - chans.uplink):.4f} "
      f"(expect {err.error_variance(es):.4f}), "
      f"downlink {np.var(dn_hat - chans.downlink):.4f} "
      f"(expect {err.error_variance(es / 2):.4f})")
