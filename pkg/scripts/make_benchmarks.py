"""Write the built-in benchmark problems as JSON files under benchmarks/."""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from plqnewton.benchmarks import BENCHMARKS  # noqa: E402


def main():
    out_dir = pathlib.Path(__file__).resolve().parents[1] / "benchmarks"
    out_dir.mkdir(exist_ok=True)
    for name, build in sorted(BENCHMARKS.items()):
        doc = build().as_problem_dict()
        path = out_dir / f"{name}.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
