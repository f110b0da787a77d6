#!/usr/bin/env python3
"""Maps annotated snippets to chunk ids and writes queries.jsonl.

usage: annotate.py CHUNKS_JSONL

Each snippet must occur in exactly one chunk; the chunk id is the SHA-256 of
the refined chunk text, so this must be re-run whenever ingestion changes.
"""
import json
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent


def main():
    chunks = [json.loads(line) for line in open(sys.argv[1], encoding="utf-8") if line.strip()]
    source = json.loads((HERE / "queries_source.json").read_text(encoding="utf-8"))
    out = []
    for q in source:
        ids = []
        for snippet in q["relevant"]:
            hits = [c["chunk_id"] for c in chunks if snippet in c["text"]]
            if len(hits) != 1:
                sys.exit(f"{q['query_id']}: snippet {snippet!r} matches {len(hits)} chunks")
            if hits[0] not in ids:
                ids.append(hits[0])
        out.append({"query_id": q["query_id"], "query": q["query"],
                    "relevant_chunk_ids": ids, "reference_answer": q["reference_answer"]})
    with open(HERE / "queries.jsonl", "w", encoding="utf-8") as f:
        for rec in out:
            f.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main()
