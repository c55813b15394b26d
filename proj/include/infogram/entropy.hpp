#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "infogram/gram.hpp"

namespace infogram {

/// Entropy order alpha.  The limit alpha -> 1 (Shannon) is outside the
/// supported range; orders within 1e-9 of 1 are rejected.
struct EntropyOrder {
    explicit EntropyOrder(double a);
    double alpha;
};

/// Entropy measured in bits (base-2 logarithms throughout).
struct EntropyValue {
    double bits = 0.0;
};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.  Converges
/// when the off-diagonal Frobenius norm drops below off_tol; throws
/// NumericError if max_sweeps is exhausted first.  Returned values are
/// sorted ascending.
std::vector<double> symmetric_eigenvalues(const Tensor& a,
                                          double off_tol = 1e-12,
                                          int max_sweeps = 100);

/// Spectral entropy (1/(1-alpha)) * log2(sum_i lambda_i^alpha) of a
/// unit-trace PSD matrix.  Eigenvalues in [-1e-9, 0) are clamped to zero
/// and zeros are dropped; anything below -1e-9 is rejected as not PSD.
EntropyValue entropy_eig(const GramMatrix& a, EntropyOrder order);

/// Order-2 entropy without an eigendecomposition: -log2 ||A||_F^2.
EntropyValue entropy_frob(const GramMatrix& a);

/// Dispatches to entropy_frob when alpha == 2, else entropy_eig.
EntropyValue entropy(const GramMatrix& a, EntropyOrder order);

/// Entropy of the trace-normalized Hadamard product of the given matrices.
EntropyValue joint_entropy(std::span<const GramMatrix> mats, EntropyOrder order);

/// S(a) + S(b) - S(a, b).
double mutual_information(const GramMatrix& a, const GramMatrix& b, EntropyOrder order);

/// S(a_1, ..., a_k) + S(b) - S(a_1, ..., a_k, b).
double multivariate_mi(std::span<const GramMatrix> groups, const GramMatrix& b,
                       EntropyOrder order);

/// Wall-clock comparison of the two entropy paths on identical seeded
/// unit-trace PSD matrices.
struct PathBenchResult {
    std::size_t n = 0;
    std::size_t trials = 0;
    double alpha = 2.0;
    double frob_mean_ms = 0.0;
    double frob_stddev_ms = 0.0;
    double eig_mean_ms = 0.0;
    double eig_stddev_ms = 0.0;
    double speedup = 0.0;            // eig_mean / frob_mean
    double max_abs_diff_bits = 0.0;  // value agreement across paths at alpha
};

PathBenchResult benchmark_entropy_paths(std::size_t n, std::size_t trials,
                                        EntropyOrder order, std::uint64_t seed);

} // namespace infogram
