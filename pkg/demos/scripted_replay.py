"""Replay a fixed reasoner script against the table oracle.

The script supplies only the reasoner's lines; the oracle fills in every
reader answer, so the replay doubles as a regression check on the answer
strings. Run:

    python demos/scripted_replay.py
"""

from chartloop import ChartTable, ScriptedReasoner, TableOracle, run_episode

table = ChartTable.build(
    "store-revenue",
    [("Macy's", "blue"), ("Bloomingdale's", "orange")],
    ["2018", "2019"],
    [["598", "613"], ["52", "55"]],
)

script = [
    "Let's describe the figure.",
    "Let's extract the data of Macy's BY 2019.",
    "Let's extract the data of Bloomingdale's BY 2019.",
    "The difference between Macy's and Bloomingdale's in 2019 is 613-55=558. "
    "So the answer is 558.",
]

trace = run_episode(
    "What is the difference between Macy's and Bloomingdale's in 2019?",
    "store-revenue",
    ScriptedReasoner(script),
    TableOracle([table]),
)
for step in trace.steps:
    print(f"{step.role.value:>15} | {step.text}")
print(f"\nfinal: {trace.final.raw} ({trace.terminated_by.value})")
