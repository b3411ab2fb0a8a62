"""Writes tests/fixtures/ttest_reference.csv: one-sided p-values for the
alternative mean(model) < mean(baseline), computed with scipy.

Columns: kind (one_sample, student, welch), baseline and model scores
separated by ';', p.
"""
import pathlib
import random

from scipy import stats

ROOT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"
rng = random.Random(1234)
rows = []

# Textbook Welch example (two samples of 15 with unequal spread).
a1 = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4]
a2 = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4]
rows.append(("welch", a2, a1, stats.ttest_ind(a1, a2, equal_var=False, alternative="less").pvalue))
rows.append(("student", a2, a1, stats.ttest_ind(a1, a2, equal_var=True, alternative="less").pvalue))

for i in range(12):
    n1, n2 = rng.randint(2, 40), rng.randint(2, 40)
    shift = rng.uniform(-0.05, 0.05)
    base = [round(rng.gauss(0.25, rng.uniform(0.005, 0.03)), 6) for _ in range(n1)]
    model = [round(rng.gauss(0.25 + shift, rng.uniform(0.005, 0.03)), 6) for _ in range(n2)]
    rows.append(("welch", base, model, stats.ttest_ind(model, base, equal_var=False, alternative="less").pvalue))
    rows.append(("student", base, model, stats.ttest_ind(model, base, equal_var=True, alternative="less").pvalue))
    fixed = round(rng.uniform(0.2, 0.3), 6)
    rows.append(("one_sample", [fixed], model, stats.ttest_1samp(model, fixed, alternative="less").pvalue))

with open(ROOT / "ttest_reference.csv", "w") as f:
    f.write("kind,baseline,model,p\n")
    for kind, b, m, p in rows:
        f.write(f"{kind},{';'.join(map(repr, b))},{';'.join(map(repr, m))},{float(p)!r}\n")
