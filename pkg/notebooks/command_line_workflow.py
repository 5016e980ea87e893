"""
Command line workflow
=====================

Run the four subcommands on a copy of the reference configuration in a
temporary directory and show the files they write.
"""
# %%
import tempfile
from pathlib import Path

from pqlab.cli import ExperimentConfig, main

tmp = Path(tempfile.mkdtemp())
cfg = ExperimentConfig(Lmax=10, out=str(tmp / "out"), cache_dir=str(tmp / "cache"))
path = tmp / "run.cfg"
path.write_text(cfg.to_text())
print(path.read_text())

# %%
for args in (["gap"], ["verify"], ["count"], ["count", "--mode", "b_tau"], ["distribution"]):
    code = main(args + ["--config", str(path)])
    print(" ".join(args), "-> exit", code)

# %%
for f in sorted((tmp / "out").iterdir()):
    print(f.name, f.stat().st_size, "bytes")
print((tmp / "out" / "count_b_o.json").read_text())
