"""Measure the DSP quantities whose thresholds the tests pin: filter attenuation,
chirp spectrum, estimation error at two regularization levels."""

import argparse

import numpy as np

from eardynamic.channel import band_bins, estimate_response
from eardynamic.dsp import BandSplitConfig, ChannelRole, ProbeConfig, Recording, highpass_taps, split_bands, \
    synthesize_probe


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=50)
    args = ap.parse_args()
    fs = 48000
    t = np.arange(fs) / fs
    print(f"high-pass taps: {len(highpass_taps(BandSplitConfig(), fs))}")
    for f in (1000, 4000, 14000, 15000, 16000, 18000, 23000):
        x = np.sin(2 * np.pi * f * t)
        hi, _ = split_bands(Recording(fs, x, ChannelRole.MIXED))
        print(f"tone {f:>5d} Hz -> inaudible branch {20 * np.log10(rms(hi.samples) / rms(x)):+8.2f} dB")

    probe = synthesize_probe(ProbeConfig())
    chirp = probe.samples[:probe.config.chirp_samples]
    spec = np.abs(np.fft.rfft(chirp * np.hanning(len(chirp)), 8192))
    f = np.fft.rfftfreq(8192, 1 / fs)
    inband = spec[(f >= 16000) & (f <= 23000)].max()
    out = spec[(f < 15500) | (f > 23500)].max()
    print(f"Hann-windowed chirp: out-of-band peak {20 * np.log10(out / inband):.1f} dB re in-band peak")
    period = np.abs(probe.spectrum())
    k = band_bins((16000, 23000), fs / probe.period)
    db = 20 * np.log10(period[k] / np.median(period[k]))
    print(f"period spectrum on estimation grid: edges {db[0]:+.2f}/{db[-1]:+.2f} dB, "
          f"interior range [{db[1:-1].min():+.2f}, {db[1:-1].max():+.2f}] dB")

    for eps in (1e-3, 1e-6):
        errs = []
        for seed in range(args.trials):
            ir = np.random.default_rng(seed).normal(size=32)
            frame = np.convolve(probe.samples, ir)[:probe.period]
            H = estimate_response(frame, probe, eps).values
            ref = np.fft.rfft(ir, probe.period)[k]
            errs.append(np.linalg.norm(H - ref) / np.linalg.norm(ref))
        print(f"eps={eps:g}: relative L2 error median {np.median(errs):.3g}, max {np.max(errs):.3g}")


if __name__ == "__main__":
    main()
