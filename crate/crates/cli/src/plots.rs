//! Matplotlib scripts written next to the CSVs. They only read the files in
//! their own directory, so an output folder can be moved and replotted.

pub const BANDS: &str = r#"import numpy as np
import matplotlib.pyplot as plt

data = np.genfromtxt("bands.csv", delimiter=",", names=True)
cols = data.dtype.names
ks = [c for c in cols if c.startswith("k")]
es = [c for c in cols if c.startswith("E")]

if len(ks) == 2:
    fig = plt.figure(figsize=(7, 6))
    ax = fig.add_subplot(projection="3d")
    for e in es:
        ax.plot_trisurf(data[ks[0]], data[ks[1]], data[e], alpha=0.6)
    ax.set_xlabel("$k_1$")
    ax.set_ylabel("$k_2$")
    ax.set_zlabel("$E$")
else:
    fig, ax = plt.subplots(figsize=(7, 4))
    x = data[ks[0]] if len(ks) == 1 else np.arange(len(data))
    order = np.argsort(x)
    for e in es:
        ax.plot(x[order], data[e][order], ".", ms=2)
    ax.set_xlabel("$k_1$" if len(ks) == 1 else "grid index")
    ax.set_ylabel("$E$")
fig.tight_layout()
fig.savefig("bands.png", dpi=150)
"#;

pub const TRACE: &str = r#"import numpy as np
import matplotlib.pyplot as plt

T = @T@
data = np.genfromtxt("@FILE@", delimiter=",", names=True)
fig, ax = plt.subplots(figsize=(7, 4))
ax.plot(data["t"], data["overlapSq"], label="overlap$^2$ with target")
ax.plot(data["t"], data["successProb"], label="success probability")
ax.axvline(T, color="k", ls="--", lw=0.8, label="predicted $T$")
ax.set_xlabel("$t$")
ax.legend()
fig.tight_layout()
fig.savefig("@FILE@".replace(".csv", ".png"), dpi=150)
"#;

pub const MOMENTS: &str = r#"import numpy as np
import matplotlib.pyplot as plt

data = np.genfromtxt("moments.csv", delimiter=",", names=True)
fig, ax = plt.subplots(figsize=(6, 4))
for m in np.unique(data["m"]):
    sel = data["m"] == m
    ax.plot(data["l"][sel], data["value"][sel], "o-", label=f"moment {int(m)}")
ax.set_xscale("log")
ax.set_xlabel("$l$")
ax.legend()
fig.tight_layout()
fig.savefig("moments.png", dpi=150)
"#;

pub const SCALING: &str = r#"import numpy as np
import matplotlib.pyplot as plt

data = np.genfromtxt("scaling.csv", delimiter=",", names=True)
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(data["N"], data["maxOverlapSq"] * np.log(data["N"]), "o-")
ax.set_xscale("log")
ax.set_xlabel("$N$")
ax.set_ylabel("max overlap$^2$ $\\cdot \\ln N$")
fig.tight_layout()
fig.savefig("scaling.png", dpi=150)
"#;

pub fn trace_script(file: &str, run_time: f64) -> String {
    TRACE
        .replace("@T@", &format!("{run_time:.16e}"))
        .replace("@FILE@", file)
}
