"""Within-subject, cross-subject and cross-category feature similarity on a simulated population."""

import argparse

import numpy as np

from eardynamic.channel import estimate_mean_response, similarity, to_feature
from eardynamic.dsp import ProbeConfig, frame_chirp_periods, synthesize_probe
from eardynamic.motion import HeadPosture
from eardynamic.phonemes import CATEGORIES
from eardynamic.sim import PROBE_LEVEL, sample_population, synthesize_reflection

FS = 48000


def feature(subject, probe, category, seed, snr_db, posture=HeadPosture.FORWARD):
    script = [] if category is None else [(category, 0.15)]
    rec = synthesize_reflection(subject, probe, script, posture, snr_db=snr_db, seed=seed, lead=0.03)
    lo, hi = (0, round(0.03 * FS)) if category is None else (round(0.03 * FS), round(0.18 * FS))
    frames = [f.samples for f in frame_chirp_periods(rec, probe) if f.start >= lo and f.start + probe.period <= hi]
    return to_feature(estimate_mean_response(frames, probe))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--subjects", type=int, default=20)
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--snr-db", type=float, nargs="+", default=[30.0, 20.0, 10.0])
    args = ap.parse_args()
    probe = synthesize_probe(ProbeConfig(amplitude=PROBE_LEVEL))
    pop = sample_population(args.subjects, args.seed)
    n = len(pop)
    print("snr_db\twithin_mean\twithin_min\tcross_mean\tcross_q95\tcross_category_mean")
    for snr in args.snr_db:
        f = {(i, c, s): feature(p, probe, c, 1000 * i + 10 * c.index + s, snr)
             for i, p in enumerate(pop) for c in CATEGORIES for s in (0, 1)}
        within = [similarity(f[i, c, 0], f[i, c, 1]) for i in range(n) for c in CATEGORIES]
        cross = [similarity(f[i, c, 0], f[j, c, 0]) for i in range(n) for j in range(i + 1, n) for c in CATEGORIES]
        cat = [similarity(f[i, a, 0], f[i, b, 0]) for i in range(n)
               for x, a in enumerate(CATEGORIES) for b in CATEGORIES[x + 1:]]
        print(f"{snr:g}\t{np.mean(within):.4f}\t{np.min(within):.4f}\t{np.mean(cross):.4f}\t"
              f"{np.quantile(cross, 0.95):.4f}\t{np.mean(cat):.4f}")


if __name__ == "__main__":
    main()
