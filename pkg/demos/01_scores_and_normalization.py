"""Nearest-neighbor scores with and without local-density normalization."""

# %%
import numpy as np

from ldnorm import Density, build_index, score_baseline_nn, score_normalized


def unit(deg):
    a = np.radians(deg)
    return np.array([np.cos(a), np.sin(a)])


# three references on the unit circle: 0, 90 and 45 degrees
refs = np.stack([unit(0), unit(90), unit(45)])
q = unit(10)

idx = build_index(refs, "cosine", Density.knn(1))
print("constants (distance to nearest other reference):", idx.constants_for(Density.knn(1)).values)

# %%
# the plain score is the distance to the closest reference
print("baseline nn :", score_baseline_nn(q, idx))

# normalized scores divide (or subtract) each reference's own local density
print("ratio       :", score_normalized(q, idx, "ratio"))
print("difference  :", score_normalized(q, idx, "difference"))

# %%
# a dense and a sparse cluster, one query just outside each: the raw
# distances differ by two orders of magnitude, the normalized scores do not
rng = np.random.default_rng(0)
dense = rng.normal([5.0, 0.0], 0.05, size=(200, 2))
sparse = rng.normal([0.0, 5.0], 0.5, size=(10, 2))
refs = np.vstack([dense, sparse])
queries = np.array([[5.0, 0.3], [0.0, 5.0 + 3.0]])

idx = build_index(refs, "squared_euclidean")
for variant in ("ratio", "difference"):
    for density in (Density.knn(1), Density.knn(3), Density.gwrp(0.5)):
        s = [score_normalized(x, idx, variant, density) for x in queries]
        print(f"{variant:10s} {density.label():9s} dense-side {s[0]:8.3f}  sparse-side {s[1]:8.3f}")
print("raw nn distances:", [score_baseline_nn(x, idx) for x in queries])
