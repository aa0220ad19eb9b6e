# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled posting-accumulation hot loop."""


def accumulate_doc(
    const int[::1] post_targets,
    const double[::1] post_lifts,
    const long long[::1] starts,
    const long long[::1] ends,
    const double[::1] x,
    double[::1] out,
):
    """out[t] += x_i * lift for every posting (t, lift) of feature i."""
    cdef Py_ssize_t i, j
    cdef double xi
    with nogil:
        for i in range(starts.shape[0]):
            xi = x[i]
            for j in range(starts[i], ends[i]):
                out[post_targets[j]] += xi * post_lifts[j]
