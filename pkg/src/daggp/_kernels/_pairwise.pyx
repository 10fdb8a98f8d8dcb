# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython implementation of the pairwise RBF reductions.

Streams the double loop without materializing the (n_a, n_b) kernel matrix,
which is what makes it worth compiling: Gram assembly calls this once per
matrix entry on blocks of Monte Carlo samples.
"""

from libc.math cimport exp


def pair_mean_rbf(double[:, ::1] a, double[:, ::1] b, double inv_two_l2, double variance):
    cdef Py_ssize_t na = a.shape[0]
    cdef Py_ssize_t nb = b.shape[0]
    cdef Py_ssize_t d = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc = 0.0
    cdef double sq, diff
    for i in range(na):
        for j in range(nb):
            sq = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                sq += diff * diff
            acc += exp(-inv_two_l2 * sq)
    return variance * acc / (na * nb)


def self_mean_rbf(double[:, ::1] a, double inv_two_l2, double variance):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t d = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc = 0.0  # off-diagonal pairs, counted once
    cdef double sq, diff
    for i in range(n):
        for j in range(i + 1, n):
            sq = 0.0
            for k in range(d):
                diff = a[i, k] - a[j, k]
                sq += diff * diff
            acc += exp(-inv_two_l2 * sq)
    return variance * (2.0 * acc + n) / (<double> n * n)
