"""From run records to consensus tables, charts and CSVs."""
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from fixtures import two_level_records  # noqa: E402

from levelscope.reporting import (  # noqa: E402
    appearance_percentages,
    average_across_configs,
    format_percent,
    format_pm,
    write_reports,
)

records = two_level_records()
print(len(records), "backward-elimination records")

table = appearance_percentages(records, "be:2")
for col in range(3):
    print(table.column_label(col), [format_percent(table.percentage(level, col)) for level in range(1, 11)])

avg = average_across_configs(table)
print("average over configurations:", [format_percent(v) for v in avg])
print("level 1 appears in", format_percent(avg[0]), "% of two-level subsets")

print(format_pm(65.0123, 0.3561))

with tempfile.TemporaryDirectory() as tmp:
    for p in write_reports(records, Path(tmp)):
        print("wrote", Path(p).name)
