"""On-disk formats: NPY embeddings, JSON manifest, score CSV, caches."""

# %%
import tempfile
from pathlib import Path

import numpy as np

from ldnorm import Density, MethodConfig, SynthConfig, generate, score_dataset
from ldnorm import io as fio
from ldnorm.scoring import section_indices

out = Path(tempfile.mkdtemp())
ds = generate(SynthConfig(d=8, sections=2, n_src_train=100, n_tgt_train=5))
fio.save_dataset(ds, out / "embeddings.npy", out / "manifest.json")

# the writer produces the same bytes as numpy.save
print(np.array_equal(np.load(out / "embeddings.npy"), ds.embeddings))
print((out / "embeddings.npy").read_bytes()[:64])

back = fio.load_dataset(out / "embeddings.npy", out / "manifest.json")
print(back.metas[0])

# %%
# constants can be computed once and reused; the cache carries a fingerprint
# of the references it was built from
indices = section_indices(ds)
constants = {sec: idx.constants_for(Density.knn(2)) for sec, idx in indices.items()}
ids = {sec: [ds.metas[i].id for i in ds.rows(section=sec, split="train")] for sec in indices}
fio.write_constants(constants, ids, out / "constants.json")
cached, _ = fio.read_constants(out / "constants.json")

scores = score_dataset(ds, MethodConfig("norm_ratio", density=Density.knn(2)), indices, cached)
fio.write_scores(scores, out / "scores.csv")
print((out / "scores.csv").read_text().splitlines()[:3])
print(fio.read_scores(out / "scores.csv") == scores)

# %%
# malformed input fails loudly
(out / "broken.npy").write_bytes((out / "embeddings.npy").read_bytes()[:-3])
try:
    fio.read_npy(out / "broken.npy")
except fio.TruncatedPayloadError as e:
    print("error:", e)
