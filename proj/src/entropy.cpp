#include "infogram/entropy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "infogram/error.hpp"

namespace infogram {

EntropyOrder::EntropyOrder(double a) : alpha(a) {
    if (!std::isfinite(a) || a <= 0.0)
        throw ContractError("entropy order: alpha must be positive and finite");
    if (std::fabs(a - 1.0) <= 1e-9)
        throw ContractError("entropy order: alpha == 1 (Shannon limit) is not supported");
}

std::vector<double> symmetric_eigenvalues(const Tensor& m, double off_tol, int max_sweeps) {
    if (m.rank() != 2 || m.shape()[0] != m.shape()[1])
        throw ShapeError("symmetric_eigenvalues: matrix must be square 2-d");
    std::size_t n = m.shape()[0];
    if (n == 0) throw ShapeError("symmetric_eigenvalues: empty matrix");

    double scale = 0.0;
    for (double v : m.data()) scale = std::max(scale, std::fabs(v));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::fabs(m.at(i, j) - m.at(j, i)) > 1e-9 * std::max(1.0, scale))
                throw ContractError("symmetric_eigenvalues: matrix is not symmetric");

    std::vector<double> a = m.data();
    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off_sq = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off_sq += a[p * n + q] * a[p * n + q];
        if (std::sqrt(2.0 * off_sq) < off_tol) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a[p * n + q];
                if (apq == 0.0) continue;
                double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                // Smaller-magnitude root of t^2 + 2 t theta - 1 = 0.
                double t;
                if (std::fabs(theta) > 1e154) {
                    t = 0.5 / theta;
                } else {
                    t = 1.0 / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                double tau = s / (1.0 + c);

                a[p * n + p] -= t * apq;
                a[q * n + q] += t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    double akp = a[k * n + p];
                    double akq = a[k * n + q];
                    double np = akp - s * (akq + tau * akp);
                    double nq = akq + s * (akp - tau * akq);
                    a[k * n + p] = np;
                    a[p * n + k] = np;
                    a[k * n + q] = nq;
                    a[q * n + k] = nq;
                }
            }
        }
    }
    if (!converged) {
        double off_sq = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off_sq += a[p * n + q] * a[p * n + q];
        if (std::sqrt(2.0 * off_sq) >= off_tol)
            throw NumericError("symmetric_eigenvalues: no convergence after " +
                               std::to_string(max_sweeps) + " sweeps");
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
    std::sort(eig.begin(), eig.end());
    return eig;
}

namespace {

void require_unit_trace(const GramMatrix& a, const char* who) {
    if (!a.unit_trace())
        throw ContractError(std::string(who) + ": matrix must be trace-normalized first");
}

} // namespace

EntropyValue entropy_eig(const GramMatrix& a, EntropyOrder order) {
    require_unit_trace(a, "entropy_eig");
    std::vector<double> lam = symmetric_eigenvalues(a.entries);
    double sum = 0.0;
    for (double l : lam) {
        if (l < -1e-9)
            throw DegenerateError("entropy_eig: eigenvalue " + std::to_string(l) +
                                  " below tolerance, matrix is not PSD");
        if (l <= 0.0) continue; // 0^alpha contributes nothing
        sum += std::pow(l, order.alpha);
    }
    if (sum <= 0.0)
        throw NumericError("entropy_eig: eigenvalue power sum is not positive");
    return {std::log2(sum) / (1.0 - order.alpha)};
}

EntropyValue entropy_frob(const GramMatrix& a) {
    require_unit_trace(a, "entropy_frob");
    double f = 0.0;
    for (double v : a.entries.data()) f += v * v;
    if (f <= 0.0)
        throw DegenerateError("entropy_frob: zero matrix");
    return {-std::log2(f)};
}

EntropyValue entropy(const GramMatrix& a, EntropyOrder order) {
    if (order.alpha == 2.0) return entropy_frob(a);
    return entropy_eig(a, order);
}

EntropyValue joint_entropy(std::span<const GramMatrix> mats, EntropyOrder order) {
    return entropy(hadamard_joint(mats), order);
}

double mutual_information(const GramMatrix& a, const GramMatrix& b, EntropyOrder order) {
    require_unit_trace(a, "mutual_information");
    require_unit_trace(b, "mutual_information");
    if (a.size() != b.size())
        throw ShapeError("mutual_information: sizes " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()) + " differ");
    GramMatrix joint[] = {a, b};
    return entropy(a, order).bits + entropy(b, order).bits -
           joint_entropy(joint, order).bits;
}

double multivariate_mi(std::span<const GramMatrix> groups, const GramMatrix& b,
                       EntropyOrder order) {
    if (groups.empty()) throw ContractError("multivariate_mi: empty group list");
    require_unit_trace(b, "multivariate_mi");
    for (const GramMatrix& g : groups)
        if (g.size() != b.size())
            throw ShapeError("multivariate_mi: group size " + std::to_string(g.size()) +
                             " does not match " + std::to_string(b.size()));
    std::vector<GramMatrix> all(groups.begin(), groups.end());
    all.push_back(b);
    return joint_entropy(groups, order).bits + entropy(b, order).bits -
           joint_entropy(all, order).bits;
}

PathBenchResult benchmark_entropy_paths(std::size_t n, std::size_t trials,
                                        EntropyOrder order, std::uint64_t seed) {
    if (n < 2 || trials < 1)
        throw ContractError("benchmark_entropy_paths: need n >= 2 and trials >= 1");
    using clock = std::chrono::steady_clock;

    std::vector<GramMatrix> mats;
    mats.reserve(trials);
    for (std::size_t t = 0; t < trials; ++t)
        mats.push_back(random_unit_trace_gram(n, n + 8, seed + t));

    std::vector<double> frob_ms(trials), eig_ms(trials);
    double max_diff = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        auto t0 = clock::now();
        EntropyValue f = entropy_frob(mats[t]);
        auto t1 = clock::now();
        EntropyValue e = entropy_eig(mats[t], order);
        auto t2 = clock::now();
        frob_ms[t] = std::chrono::duration<double, std::milli>(t1 - t0).count();
        eig_ms[t] = std::chrono::duration<double, std::milli>(t2 - t1).count();
        if (order.alpha == 2.0)
            max_diff = std::max(max_diff, std::fabs(f.bits - e.bits));
    }

    auto mean = [&](const std::vector<double>& xs) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s / static_cast<double>(xs.size());
    };
    auto stddev = [&](const std::vector<double>& xs, double mu) {
        double s = 0.0;
        for (double x : xs) s += (x - mu) * (x - mu);
        return std::sqrt(s / static_cast<double>(xs.size()));
    };

    PathBenchResult r;
    r.n = n;
    r.trials = trials;
    r.alpha = order.alpha;
    r.frob_mean_ms = mean(frob_ms);
    r.frob_stddev_ms = stddev(frob_ms, r.frob_mean_ms);
    r.eig_mean_ms = mean(eig_ms);
    r.eig_stddev_ms = stddev(eig_ms, r.eig_mean_ms);
    r.speedup = r.frob_mean_ms > 0.0 ? r.eig_mean_ms / r.frob_mean_ms
                                     : std::numeric_limits<double>::infinity();
    r.max_abs_diff_bits = order.alpha == 2.0
                              ? max_diff
                              : std::numeric_limits<double>::quiet_NaN();
    return r;
}

} // namespace infogram
