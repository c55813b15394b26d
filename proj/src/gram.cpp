#include "infogram/gram.hpp"

#include <algorithm>
#include <cmath>

#include "infogram/error.hpp"
#include "infogram/rng.hpp"

namespace infogram {

GramMatrix linear_gram(const Tensor& features) {
    if (features.rank() != 2)
        throw ShapeError("linear_gram: features must be 2-d, got rank " +
                         std::to_string(features.rank()));
    std::size_t n = features.shape()[0], m = features.shape()[1];
    if (n == 0) throw ContractError("linear_gram: no samples");
    Tensor k({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            const double* ri = features.data().data() + i * m;
            const double* rj = features.data().data() + j * m;
            for (std::size_t l = 0; l < m; ++l) s += ri[l] * rj[l];
            k.at(i, j) = s;
            k.at(j, i) = s;
        }
    return {std::move(k), GramNormalization::raw};
}

GramMatrix normalize_cosine(const GramMatrix& k) {
    std::size_t n = k.size();
    if (n == 0) throw ShapeError("normalize_cosine: empty matrix");
    for (std::size_t i = 0; i < n; ++i)
        if (k.entries.at(i, i) <= 1e-12)
            throw DegenerateError("normalize_cosine: diagonal entry " +
                                  std::to_string(i) + " is not positive");
    Tensor a({n, n});
    double dn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a.at(i, j) = k.entries.at(i, j) /
                         (dn * std::sqrt(k.entries.at(i, i) * k.entries.at(j, j)));
    return {std::move(a), GramNormalization::cosine};
}

GramMatrix trace_normalize(const GramMatrix& m) {
    std::size_t n = m.size();
    if (n == 0) throw ShapeError("trace_normalize: empty matrix");
    double t = trace(m);
    if (t <= 1e-300)
        throw DegenerateError("trace_normalize: trace " + std::to_string(t) +
                              " is not positive");
    Tensor a({n, n});
    for (std::size_t i = 0; i < n * n; ++i) a[i] = m.entries[i] / t;
    return {std::move(a), GramNormalization::trace1};
}

GramMatrix hadamard_joint(std::span<const GramMatrix> mats) {
    if (mats.empty()) throw ContractError("hadamard_joint: empty list");
    std::size_t n = mats[0].size();
    for (const GramMatrix& g : mats)
        if (g.size() != n)
            throw ShapeError("hadamard_joint: mixed sizes " + std::to_string(n) +
                             " and " + std::to_string(g.size()));
    Tensor prod = mats[0].entries;
    for (std::size_t k = 1; k < mats.size(); ++k)
        for (std::size_t i = 0; i < n * n; ++i) prod[i] *= mats[k].entries[i];
    return trace_normalize({std::move(prod), GramNormalization::raw});
}

GramMatrix gram_from_matrix(const Tensor& m, GramNormalization norm) {
    if (m.rank() != 2 || m.shape()[0] != m.shape()[1])
        throw ShapeError("gram_from_matrix: matrix must be square 2-d");
    std::size_t n = m.shape()[0];
    double scale = 1.0;
    for (std::size_t i = 0; i < n * n; ++i) scale = std::max(scale, std::fabs(m[i]));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::fabs(m.at(i, j) - m.at(j, i)) > 1e-12 * scale)
                throw DegenerateError("gram_from_matrix: asymmetric at (" +
                                      std::to_string(i) + "," + std::to_string(j) + ")");
    return {m, norm};
}

double trace(const GramMatrix& g) {
    double t = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) t += g.entries.at(i, i);
    return t;
}

GramMatrix random_unit_trace_gram(std::size_t n, std::size_t m, std::uint64_t seed) {
    CounterRng rng(seed);
    Tensor f({n, m});
    for (std::size_t i = 0; i < n * m; ++i) f[i] = rng.normal();
    return normalize_cosine(linear_gram(f));
}

} // namespace infogram
