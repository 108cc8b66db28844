"""Train a small denoiser on procedural wheels and sample from it.

Uses a deliberately tiny configuration so the script finishes in a couple
of minutes on one CPU core; expect blobby wheels, not the full-length
training quality.
"""

import os
import time

import numpy as np

from wheelgen.conditioning import DEFAULT_PROMPT, ToyEmbedder
from wheelgen.core import encode_png, quantize
from wheelgen.pipeline import ConditioningBundle, linear_schedule
from wheelgen.training import ToyTrainConfig, sample_batch, train_toy_denoiser
from wheelgen.wheels import build_corpus, wheel_likeness

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

items = build_corpus(200, seed=0)
config = ToyTrainConfig(steps=120, batch_size=12, base_channels=8, emb_dim=32, seed=1)
t0 = time.time()
backend, history = train_toy_denoiser(items, linear_schedule(100), config)
print(f"trained in {time.time() - t0:.0f}s, "
      f"loss {history['initial_loss']:.3f} -> {history['final_loss']:.3f}")

backend.save(os.path.join(OUT, "toy_model.pt"))

emb = ToyEmbedder()
prompt = DEFAULT_PROMPT + ", dynamic"
cond = ConditioningBundle(prompt=prompt, prompt_embedding=emb.embed_text(prompt))
samples = sample_batch(backend, [cond] * 4, range(4))
for i, img in enumerate(samples):
    with open(os.path.join(OUT, f"toy_sample_{i}.png"), "wb") as f:
        f.write(encode_png(quantize(img)))
scores = [wheel_likeness(x) for x in samples]
print("wheel-ness of samples:", [round(s, 2) for s in scores])
print("(full-length training uses 2000 corpus images and 2000 steps)")
