#pragma once

#include <cstdint>
#include <span>

#include "infogram/tensor.hpp"

namespace infogram {

enum class GramNormalization { raw, cosine, trace1 };

/// Symmetric kernel Gram matrix over a sample set.  The normalization tag
/// records whether entries are raw inner products, cosine-normalized with
/// the 1/n factor folded in, or scaled to unit trace.
struct GramMatrix {
    Tensor entries;            // [n, n]
    GramNormalization normalization = GramNormalization::raw;

    std::size_t size() const { return entries.rank() == 2 ? entries.shape()[0] : 0; }
    bool unit_trace() const { return normalization != GramNormalization::raw; }
};

/// Raw linear-kernel Gram of feature rows: K_ij = <x_i, x_j>.
GramMatrix linear_gram(const Tensor& features);

/// A_ij = K_ij / (n * sqrt(K_ii * K_jj)); requires a positive diagonal.
/// The result has unit trace.
GramMatrix normalize_cosine(const GramMatrix& k);

/// M / tr(M); the trace must be positive.
GramMatrix trace_normalize(const GramMatrix& m);

/// Trace-normalized Hadamard (elementwise) product of one or more Gram
/// matrices of equal size.
GramMatrix hadamard_joint(std::span<const GramMatrix> mats);

/// Wraps an externally supplied square matrix after checking symmetry.
GramMatrix gram_from_matrix(const Tensor& m, GramNormalization norm);

double trace(const GramMatrix& g);

/// Seeded random unit-trace PSD matrix: Gaussian features [n, m] put through
/// the linear kernel and cosine normalization.  Used by benchmarks and
/// randomized checks.
GramMatrix random_unit_trace_gram(std::size_t n, std::size_t m, std::uint64_t seed);

} // namespace infogram
