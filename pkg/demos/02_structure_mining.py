#!/usr/bin/env python3
"""Mining query structures and frequent substructures from training pairs.

Every training query is assigned to its structure (equivalence class);
then each query is decomposed into all connected subsets of its triples,
and any substructure contained in strictly more than gamma distinct
training queries is kept as frequent.
"""

from kbqg.mining import enumerate_substructures, mine, save_catalog
from kbqg.toydata import build_dataset

pairs = build_dataset()
print(f"training pairs: {len(pairs)}")

catalog = mine(pairs, gamma=2)

print(f"\nquery structures (TS): {len(catalog.structures)}")
for entry in sorted(catalog.structures.values(), key=lambda e: -e.count):
    print(f"  count={entry.count:2d}  {entry.representative}")

print(f"\nfrequent substructures (FS*, gamma=2): {len(catalog.substructures)}")
for entry in sorted(catalog.substructures.values(), key=lambda e: -e.count)[:8]:
    print(f"  count={entry.count:2d}  {entry.representative}")
print("  ...")

# decomposition of a single query
query = pairs[15].query  # a how-many question
print(f"\nquery: {query}")
print("connected substructures (one per structure):")
for key, rep in enumerate_substructures(query).items():
    print(f"  {rep}")

save_catalog(catalog, "/tmp/kbqg_catalog.json")
print("\ncatalog written to /tmp/kbqg_catalog.json")
