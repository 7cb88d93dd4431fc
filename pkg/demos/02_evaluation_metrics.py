"""AUC, partial AUC and the domain-conditioned scores on tiny hand-made inputs."""

# %%
import numpy as np

from ldnorm import SampleMeta, ScoreVector, aggregate, auc, domain_conditioned_auc, evaluate, pauc

scores = [0.1, 0.5, 0.4, 0.9]
conditions = ["normal", "normal", "anomaly", "anomaly"]
domains = ["source", "target", "source", "target"]

print("auc        ", auc(scores, conditions))
print("pauc(0.1)  ", pauc(scores, conditions, 0.1))
print("pauc(1.0)  ", pauc(scores, conditions, 1.0))  # the full curve gives back the auc

# only the normal samples of one domain, against every anomaly
print("auc source ", domain_conditioned_auc(scores, conditions, domains, "source"))
print("auc target ", domain_conditioned_auc(scores, conditions, domains, "target"))

# %%
print("harmonic  ", aggregate([0.5, 1.0], "harmonic"))
print("arithmetic", aggregate([0.5, 1.0], "arithmetic"))

# %%
# whole report from metadata + a score vector
metas = [SampleMeta(f"x{i}", "fan", d, "test", c) for i, (d, c) in enumerate(zip(domains, conditions))]
report = evaluate(metas, ScoreVector([m.id for m in metas], scores), p=0.1, mode="harmonic")
sec = report.section("fan")
print(sec.auc_source, sec.auc_target, sec.pauc, "->", report.aggregate)

# %%
# rank metrics ignore any strictly increasing transform of the scores
squashed = np.tanh(np.asarray(scores) * 3) - 2
print(auc(squashed, conditions) == auc(scores, conditions))
