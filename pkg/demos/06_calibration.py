"""
Transmitter and receiver calibration with LMS.

A known 16QAM training field passes through unknown Tx and Rx responses.
Four FIR filters sit around a field-inversion block. They are adapted so
that the reconstructed power matches the training power. Afterwards the
taps reveal the hardware responses.
"""

import numpy as np

from ser_dsp.experiments import CalibrationSpec, run_calibration

runs = {block: run_calibration(CalibrationSpec(inversion=block)) for block in ("DFR_BLOCK", "IC1_BLOCK")}
for block, out in runs.items():
    print(f"{block}: lag {out.lag}, windowed MSE every 10 windows "
          f"{np.round(out.mse_db[::10], 1).tolist()} dB")

out = runs["DFR_BLOCK"]
f = out.responses.freqs
est = 20 * np.log10(np.abs(out.responses.rx_response_1))
truth = 20 * np.log10(out.truth_rx)
for k in range(0, len(f), 20):
    print(f"{f[k] / 1e9:5.1f} GHz  Rx estimate {est[k]:6.2f} dB  truth {truth[k]:6.2f} dB")
