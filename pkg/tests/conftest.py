from __future__ import annotations

import pytest

from gridreconf import builtin_network

# the published formatted-response sample for the 33-bus test set: five
# open lines, 33 voltages, one loss value
FORMATTED_RESPONSE_33 = (
    "Extracted open lines: (14, 15), (32, 33), (7, 8), (25, 29), (11, 10)\n"
    "Extracted node voltages: 1.0, 0.9988, 0.9946, 0.9928, 0.9911, 0.9869, "
    "0.9867, 0.9846, 0.9829, 0.9827, 0.9854, 0.9854, 0.9843, 0.984, 0.9804, "
    "0.9797, 0.9786, 0.9781, 0.998, 0.9912, 0.9893, 0.9878, 0.993, 0.99, "
    "0.9886, 0.9862, 0.9853, 0.9814, 0.9786, 0.9774, 0.9757, 0.9754, 0.978\n"
    "Extracted system loss: 22.4551"
)

# a published baseline response with no extractable sections
PROSE_RESPONSE = (
    "The code is a Python script that takes a list of busses and lines, and "
    "generates a network that connects them using the given number of nodes "
    "and lines. The generated network is then used to calculate the system "
    "loss and the system load, which are then displayed in the output."
)

# the reference optimal open-line set for the 33-bus network at full load
OPTIMAL_OPEN_33 = frozenset({(7, 8), (9, 10), (14, 15), (25, 29), (32, 33)})


@pytest.fixture(scope="session")
def ieee33():
    return builtin_network("ieee33")
