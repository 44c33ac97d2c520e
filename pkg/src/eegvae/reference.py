"""Reference measurements from the original study's private EEG recordings.

These numbers were reported for models trained on proprietary recordings that
are not distributed with this package, so they cannot be recomputed here; they
are retained as metadata for side-by-side display in evaluation reports. The
synthetic corpus in :mod:`eegvae.synth` is a stand-in at a much smaller scale,
so its absolute scores are not comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

#: Isolated recognition test accuracy (percent) from the original recordings:
#: 30-dimensional feature baseline vs. the single extracted latent dimension.
ISOLATED_ACCURACY_PCT = {"baseline-30": 50.0, "vae-1": 54.55}


@dataclass(frozen=True)
class ContinuousReference:
    """One continuous-recognition row: test WER (percent) by feature kind."""

    n_sentences: int
    wer_baseline_30: float
    wer_prior_technique: float
    wer_vae_1: float


#: Continuous recognition test WER (percent) by test-corpus size: the
#: 30-dimensional baseline, a previously published acoustic/articulatory
#: transfer technique on the same recordings, and the single-dimension
#: extracted features.
CONTINUOUS_WER_PCT = (
    ContinuousReference(30, 82.63, 74.36, 75.47),
    ContinuousReference(60, 84.30, 74.45, 77.57),
    ContinuousReference(90, 82.67, 77.76, 79.85),
    ContinuousReference(120, 88.94, 79.68, 74.48),
    ContinuousReference(150, 90.39, 81.97, 78.15),
    ContinuousReference(180, 85.39, 84.9, 84.22),
)


def summary_lines() -> list[str]:
    """Human-readable lines for report footers."""
    lines = [
        "Reference (original private recordings; not reproducible here):",
        "  isolated accuracy: baseline-30 {b:.2f}%, vae-1 {v:.2f}%".format(
            b=ISOLATED_ACCURACY_PCT["baseline-30"], v=ISOLATED_ACCURACY_PCT["vae-1"]
        ),
    ]
    for row in CONTINUOUS_WER_PCT:
        lines.append(
            f"  continuous WER at {row.n_sentences} sentences: "
            f"baseline-30 {row.wer_baseline_30:.2f}%, prior {row.wer_prior_technique:.2f}%, "
            f"vae-1 {row.wer_vae_1:.2f}%"
        )
    return lines
