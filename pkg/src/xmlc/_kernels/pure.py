"""NumPy fallback for the posting-accumulation hot loop."""

from __future__ import annotations

import numpy as np


def accumulate_doc(post_targets, post_lifts, starts, ends, x, out):
    """out[t] += x_i * lift for every posting (t, lift) of feature i.

    Targets are unique within one feature's posting segment, so the
    fancy-indexed in-place add accumulates correctly.
    """
    for i in range(starts.shape[0]):
        s, e = starts[i], ends[i]
        if s == e:
            continue
        out[post_targets[s:e]] += x[i] * post_lifts[s:e]
