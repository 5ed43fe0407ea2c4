"""
Support functions, faces and gauges
===================================

The l1 ball, a group ball and a Minkowski sum of a box with a subspace,
queried through the same three primitives.
"""

import numpy as np

from gdpen.geometry import CoordBox, GroupBall, MinkowskiSum, Subspace, SubspaceSet, gauge_value, support_face, support_value

x = np.array([3.0, -1.0, 0.5])

box = CoordBox(3, coords=range(3))
print("h_box(x)      =", support_value(box, x))  # the l1 norm of x
print("gauge_box(x)  =", gauge_value(box, x))  # the linf norm

groups = GroupBall([[0, 1], [2]], active=[0, 1])
print("h_groups(x)   =", support_value(groups, x))

# adding a line makes the support function infinite off its orthogonal complement
line = Subspace.span(np.array([[0.0], [0.0], [1.0]]))
summed = MinkowskiSum((box, SubspaceSet(line)))
print("h_sum(x)      =", support_value(summed, x))
print("h_sum(x, 0)   =", support_value(summed, np.array([3.0, -1.0, 0.0])))

# the maximizing face of the box at x is a single vertex
print("face:", support_face(box, x))
