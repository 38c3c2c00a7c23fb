//! Matplotlib scripts written next to the data they plot. They are emitted
//! only; nothing here runs Python.

/// Success probability against `T` for each optimiser.
pub const SWEEP: &str = r#"import csv, collections
import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(open("results.csv")) if r["status"] == "ok"]
series = collections.defaultdict(lambda: collections.defaultdict(list))
for r in rows:
    series[r["optimizer"]][float(r["T"])].append(float(r["success_probability"]))
for name, by_t in sorted(series.items()):
    ts = sorted(by_t)
    means = [sum(by_t[t]) / len(by_t[t]) for t in ts]
    plt.plot(ts, means, marker="o", label=name)
plt.xlabel("T")
plt.ylabel("success probability")
plt.legend()
plt.savefig("sweep.png", dpi=150)
"#;

/// Boxplots of best success per optimiser and `T`.
pub const COMPARE: &str = r#"import csv, collections
import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(open("results.csv")) if r["status"] == "ok"]
groups = collections.defaultdict(list)
for r in rows:
    groups[(float(r["T"]), r["optimizer"])].append(float(r["success_probability"]))
keys = sorted(groups)
plt.boxplot([groups[k] for k in keys], labels=[f"{o}\nT={t:g}" for t, o in keys])
plt.ylabel("success probability")
plt.savefig("compare.png", dpi=150)
"#;

/// One histogram panel per `T`, one colour per scenario.
pub const TRANSFER: &str = r#"import csv, collections
import matplotlib.pyplot as plt

colors = {"linear": "grey", "single": "pink", "average": "green", "qzero": "gold"}
rows = [r for r in csv.DictReader(open("results.csv")) if r["status"] == "ok"]
by_t = collections.defaultdict(lambda: collections.defaultdict(list))
for r in rows:
    by_t[float(r["T"])][r["optimizer"]].append(float(r["success_probability"]))
ts = sorted(by_t)
fig, axes = plt.subplots(1, len(ts), figsize=(4 * len(ts), 3), squeeze=False)
for ax, t in zip(axes[0], ts):
    for name, vals in by_t[t].items():
        ax.hist(vals, bins=20, range=(0, 1), alpha=0.6, color=colors.get(name), label=name)
    ax.set_title(f"T={t:g}")
    ax.set_xlabel("success probability")
axes[0][0].set_ylabel("instances")
axes[0][0].legend()
fig.tight_layout()
fig.savefig("transfer.png", dpi=150)
"#;

/// Median best-so-far energy against cumulative queries.
pub const EFFICIENCY: &str = r#"import csv, collections
import matplotlib.pyplot as plt

series = collections.defaultdict(list)
for r in csv.DictReader(open("medians.csv")):
    if r["median_best_energy"]:
        series[r["method"]].append((int(r["query"]), float(r["median_best_energy"])))
for name, pts in sorted(series.items()):
    pts.sort()
    plt.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=name)
plt.xlabel("queries")
plt.ylabel("median best energy")
plt.yscale("log")
plt.legend()
plt.savefig("efficiency.png", dpi=150)
"#;

/// Excess energy over time per schedule, and the min-gap location histogram.
pub const DIAGNOSTICS: &str = r#"import csv, collections
import matplotlib.pyplot as plt

traces = collections.defaultdict(list)
for r in csv.DictReader(open("traces.csv")):
    if r["excess"]:
        traces[(r["instance"], r["schedule"])].append((float(r["t"]), float(r["excess"])))
fig, (a, b) = plt.subplots(1, 2, figsize=(10, 3.5))
colors = {"linear": "grey", "sd": "green", "qzero": "gold"}
for (inst, name), pts in traces.items():
    a.plot([p[0] for p in pts], [p[1] for p in pts], color=colors.get(name), alpha=0.5)
a.set_xlabel("t")
a.set_ylabel("excess energy")
locs = [float(r["s_at_min_gap"]) for r in csv.DictReader(open("mingap.csv"))]
b.hist(locs, bins=20, range=(0, 1))
b.set_xlabel("s at minimum gap")
fig.tight_layout()
fig.savefig("diagnostics.png", dpi=150)
"#;
