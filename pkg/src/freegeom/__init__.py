"""Computational geometry of free-group automorphisms.

Outer space and its Lipschitz metric, folding paths and flaring, Whitehead and
Stallings algorithms, the primitive loop / co-surface graphs, and a simulator
for the Cayley graph bundle of an extension E_Gamma of a free group.
"""
__version__ = "0.1.0"
