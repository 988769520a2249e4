"""Compile the queue simulation, look at the sheet, and run it with two seeds."""

from modelmaster.evaluator import evaluate, to_csv
from modelmaster.pipeline import compile_file, compile_source, corpus_path
from modelmaster.sylk import write_sylk

result = compile_file(corpus_path("queue"))
cm = result.cellmap
rows, cols = cm.extent
print(f"queue.mm -> {len(cm)} cells over {rows} rows and {cols} columns")

print("\nFirst SYLK records:")
for line in write_sylk(cm).decode().splitlines()[:8]:
    print("  " + line)

for seed in (1, 3):
    print(f"\nSeed {seed}, first four customers:")
    for line in to_csv(cm, evaluate(cm, seed=seed)).splitlines()[:5]:
        print("  " + line)

src = result.source.replace("constant N = 4;", "constant N = 6;")
wider = compile_source(src).cellmap
print(f"\nWith six servers the sheet grows from {cols} to {wider.extent[1]} columns.")
