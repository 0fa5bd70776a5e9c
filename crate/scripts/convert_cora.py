#!/usr/bin/env python3
"""Convert the Planetoid Cora files (cora.content, cora.cites) into the
edge-list / CSV formats read by copygraph.

Nodes are numbered in cora.content order, classes in sorted name order.
Citations become undirected edges; duplicates and self-citations are dropped.

usage: convert_cora.py SRC_DIR OUT_DIR
"""
import sys
from pathlib import Path


def main(src: Path, out: Path) -> None:
    ids, labels, rows = {}, [], []
    for line in (src / "cora.content").read_text().splitlines():
        tok = line.split()
        if not tok:
            continue
        ids[tok[0]] = len(ids)
        rows.append([j for j, x in enumerate(tok[1:-1]) if x == "1"])
        labels.append(tok[-1])
    classes = sorted(set(labels))

    edges = set()
    skipped = 0
    for line in (src / "cora.cites").read_text().splitlines():
        tok = line.split()
        if len(tok) != 2:
            continue
        if tok[0] not in ids or tok[1] not in ids:
            skipped += 1
            continue
        a, b = ids[tok[0]], ids[tok[1]]
        if a != b:
            edges.add((min(a, b), max(a, b)))

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.txt", "w") as f:
        f.write(f"%nodes {len(ids)}\n")
        for a, b in sorted(edges):
            f.write(f"{a} {b}\n")
    with open(out / "labels.csv", "w") as f:
        f.write("node,label\n")
        for v, c in enumerate(labels):
            f.write(f"{v},{classes.index(c)}\n")
    with open(out / "features.csv", "w") as f:
        f.write("node,feature_index,value\n")
        for v, row in enumerate(rows):
            for j in row:
                f.write(f"{v},{j},1\n")
    with open(out / "classes.txt", "w") as f:
        f.write("\n".join(classes) + "\n")
    print(f"{len(ids)} nodes, {len(edges)} edges, {len(classes)} classes, {skipped} citations skipped")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(Path(sys.argv[1]), Path(sys.argv[2]))
