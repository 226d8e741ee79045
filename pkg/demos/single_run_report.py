"""Train two variants on the standard task set and render their diagnostics.

    python3 demos/single_run_report.py [out_dir]

Writes one metrics CSV per variant and the report charts next to them.
"""

# %%
import sys
from dataclasses import replace
from pathlib import Path

from grpolab.cli import cmd_report
from grpolab.diagnostics import write_metrics
from grpolab.experiments import STANDARD_TRAIN, standard_task_set
from grpolab.presets import apply_preset, describe
from grpolab.trainer import train

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)
task_set = standard_task_set()

# %%
files = []
for variant in ("grpo", "asym"):
    cfg = replace(apply_preset(variant, STANDARD_TRAIN), seed=0)
    _, records = train(task_set, cfg)
    path = out / f"{variant}.csv"
    write_metrics(records, path, "csv", cfg.group_size, header={"preset": describe(variant)})
    files.append(str(path))
    last = records[-1]
    print(f"{variant}: final entropy {last.mean_token_entropy:.3f}, "
          f"smoothed validation {last.ema_validation_accuracy:.2f}")

# %%
cmd_report(files, str(out / "charts"))
print("charts in", out / "charts")
