"""Build a pipeline config by hand and watch validation accept or reject it.

Run: python3 demos/01_validate_graphs.py
"""

import json

from modalflow.errors import CycleError, ModalityMismatchError
from modalflow.graph import build_graph, topological_order


def port(name, modality):
    return {"name": name, "modality": modality}


good = {
    "version": 1,
    "nodes": [
        {"id": "src", "kind": "input", "in_ports": [], "out_ports": [port("text", "text")]},
        {
            "id": "sum", "kind": "adapter", "operation": "llm.summarize",
            "in_ports": [port("text", "text")], "out_ports": [port("out", "text")],
        },
        {"id": "dst", "kind": "output", "in_ports": [port("text", "text")], "out_ports": []},
    ],
    "edges": [
        {"from": "src.text", "to": "sum.text"},
        {"from": "sum.out", "to": "dst.text"},
    ],
}

graph = build_graph(good)
print("accepted:", topological_order(graph))

# a back edge turns the chain into a loop; validation refuses it
cyclic = json.loads(json.dumps(good))
cyclic["nodes"][1] = {
    "id": "sum", "kind": "transform", "operation": "concat_text",
    "in_ports": [port("parts", "text")], "out_ports": [port("out", "text")],
}
cyclic["edges"] = [
    {"from": "src.text", "to": "sum.parts"},
    {"from": "sum.out", "to": "sum.parts"},
    {"from": "sum.out", "to": "dst.text"},
]
try:
    build_graph(cyclic)
except CycleError as err:
    print("rejected cycle:", err)

# wiring an embedding into a text port fails unless a coercion exists
mismatched = json.loads(json.dumps(good))
mismatched["nodes"][1] = {
    "id": "sum", "kind": "adapter", "operation": "text.embed",
    "in_ports": [port("text", "text")], "out_ports": [port("out", "embedding")],
}
try:
    build_graph(mismatched)
except ModalityMismatchError as err:
    print("rejected wiring:", err)
else:
    # embedding -> text is actually coercible, so this one passes
    print("accepted: embedding output coerces to the text sink")
