"""
Gradient-descent reconstruction (GD).

GD minimizes the squared residual of the two detection equations one
small step at a time. It is slower than cancellation per iteration but
degrades gracefully when the receiver bandwidth is cut, because nothing in
it depends on an exact SSBI estimate.
"""

import numpy as np

from ser_dsp.channel import ChannelConfig, apply_cd
from ser_dsp.frontend import FrontEndConfig, detect, set_lospr
from ser_dsp.reconstruct import ClipSpec, ClipTarget, cic, dfr, gd, gd_error_norm, mult_count
from ser_dsp.rxdsp import rx_chain
from ser_dsp.waveform import gen_qam_symbols, rrc_shape

fibre = ChannelConfig(160.0)
syms = gen_qam_symbols("QAM64", 2**15, seed=1)
rx = apply_cd(rrc_shape(syms, 2, 0.01, 256), fibre)
clip = ClipSpec(12.0, ClipTarget.IQ_BRANCHES)

cfg = set_lospr(rx, 8.0, FrontEndConfig())
pair = detect(rx, cfg)
a = cfg.a1
for n in (40, 120, 160, 300, 600):
    rec = gd(pair, a, n, 0.05, clip)
    snr = rx_chain(rec.i_hat, rec.q_hat, fibre, syms).effective_snr_db
    e = gd_error_norm(rec.i_hat / (2 * a), rec.q_hat / (2 * a), rx.samples.real / (2 * a),
                      rx.samples.imag / (2 * a))
    print(f"{n:4d} iterations ({mult_count('GD', n):4d} mults): {snr:5.2f} dB, "
          f"median normalized error {np.median(e):.1e}")

print("BWR   DFR    CIC    GD")
for bwr in (2.0, 1.6, 1.4, 1.2):
    cfg = set_lospr(rx, 8.0, FrontEndConfig(bwr=bwr))
    pair = detect(rx, cfg)
    clip_cic = ClipSpec(6.0 + (bwr - 1.2) / 0.8)
    row = [dfr(pair, cfg.a1), cic(pair, cfg.a1, 20, clip_cic), gd(pair, cfg.a1, 120, 0.05, clip)]
    snr = [rx_chain(r.i_hat, r.q_hat, fibre, syms).effective_snr_db for r in row]
    print(f"{bwr:3.1f}  " + "  ".join(f"{v:5.2f}" for v in snr))
