"""K and r sweeps: how much neighborhood the local density should use."""

# %%
from ldnorm import SynthConfig, generate, sweep

ds = generate(SynthConfig(seed=3))

for row in sweep(ds, "knn", [1, 2, 4, 8, 16]):
    print(f"K={row.param:<4g} hmean={row.aggregate:.4f} src={row.auc_source:.4f} tgt={row.auc_target:.4f}")

# %%
for row in sweep(ds, "gwrp", [0.0, 0.5, 0.9, 1.0]):
    print(f"r={row.param:<4g} hmean={row.aggregate:.4f} src={row.auc_source:.4f} tgt={row.auc_target:.4f}")

# r=0 keeps only the nearest neighbor, i.e. the K=1 case
assert sweep(ds, "gwrp", [0.0])[0].aggregate == sweep(ds, "knn", [1])[0].aggregate

# %%
# the difference variant, with the arithmetic aggregate
for row in sweep(ds, "knn", [1, 4], variant="difference", mode="arithmetic"):
    print(row)
