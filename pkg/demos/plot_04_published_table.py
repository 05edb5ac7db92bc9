"""
The published MAE table
=======================

Load the shipped MAE-by-vehicle-count table and recompute its column means.
The stated average for the proposed method does not match its own column.
"""

from deeprbf.report import load_fixture, render_markdown, table_notes

table = load_fixture()
print(render_markdown(table, table_notes(table)))
