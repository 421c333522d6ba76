#!/usr/bin/env python3
"""Cross-validated end-to-end evaluation and the noisy-linking protocol.

Runs the full pipeline (mine -> predict -> rank -> merge -> ground) under
5-fold cross-validation and reports macro answer-F1 plus Precision@1 and
Precision@5. The noisy run injects four same-kind distractor candidates
per mention at 0.9x the true candidate's score; the validation cascade
absorbs most of them, so Precision@5 survives better than Precision@1.

Uses the bag-of-words predictor so the whole script runs in ~3 minutes;
switch predictor="bilstm" for the neural model.
"""

import warnings

from kbqg.evaluation import Dataset, PipelineConfig, run_pipeline
from kbqg.predictor import TrainConfig
from kbqg.toydata import build_dataset, build_kb

warnings.filterwarnings("ignore")

dataset = Dataset("mini", build_dataset())
kb = build_kb()

base = dict(gamma=2, train=TrainConfig(seed=13), predictor="bow",
            linking="gold", dev_policy="stratified", seed=13)

print("clean gold linking:")
clean = run_pipeline(dataset, kb, PipelineConfig(**base))
print(" ", clean.summary())

print("\nnoisy linking (4 distractors per mention, 0.9x score):")
noisy = run_pipeline(dataset, kb, PipelineConfig(**base, distractors=4,
                                                 distractor_factor=0.9))
print(" ", noisy.summary())

d1 = clean.precision_at_1[0] - noisy.precision_at_1[0]
d5 = clean.precision_at_5[0] - noisy.precision_at_5[0]
print(f"\nP@1 degraded by {d1:.3f}, P@5 by {d5:.3f} "
      f"(top-5 survives: wrong candidates mostly fail validation)")

print("\nablation (oracle probabilities, single fold, for speed):")
for setting in ("full", "rank-w-sub", "merge-only"):
    cfg = PipelineConfig(**{**base, "predictor": "oracle", "setting": setting})
    report = run_pipeline(dataset, kb, cfg, folds=[3])
    print(f"  {report.summary()}")
