#!/usr/bin/env python3
"""Build the bundled synthetic demo snapshot and its recorded-exchange fixtures.

Creates a workspace directory holding:
  demo.db                the 20-paper snapshot with seeded API cache
  fixtures/*.ndjson      the recorded exchanges that populated it

The snapshot can then be scored entirely offline:
  litmetrics --db <dir>/demo.db --offline --now 2024-10-01 score --all
"""

from __future__ import annotations

import argparse
from pathlib import Path

from litmetrics.demo import DEMO_NOW, build_demo_snapshot, write_fixture_ndjson


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", nargs="?", default="demo-workspace",
                        help="directory to create (default demo-workspace)")
    parser.add_argument("--force", action="store_true", help="overwrite an existing snapshot")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    db_path = out_dir / "demo.db"
    if db_path.exists():
        if not args.force:
            parser.error(f"{db_path} already exists (use --force)")
        db_path.unlink()

    corpus = build_demo_snapshot(db_path)
    fixtures = write_fixture_ndjson(corpus, out_dir / "fixtures")
    print(f"snapshot: {db_path} ({len(corpus.papers)} reviews, "
          f"{len(corpus.references)} references)")
    print(f"fixtures: {fixtures} ({len(corpus.exchanges)} exchanges)")
    print("try:")
    print(f"  litmetrics --db {db_path} --offline --now {DEMO_NOW} score --all")
    print(f"  litmetrics --db {db_path} --offline stats tncsi")
    print(f"  litmetrics --db {db_path} --offline trend --feature discussion --sigma 1.0")


if __name__ == "__main__":
    main()
