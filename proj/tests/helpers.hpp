#pragma once

#include <sys/wait.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "infogram/gram.hpp"
#include "infogram/rng.hpp"
#include "infogram/tensor.hpp"

namespace testutil {

using infogram::CounterRng;
using infogram::GramMatrix;
using infogram::Tensor;

inline Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed,
                            double sigma = 1.0) {
    CounterRng rng(seed);
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = sigma * rng.normal();
    return t;
}

/// Unit rows drawn from a Gaussian; width >= 1.
inline Tensor random_unit_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    return infogram::l2_normalize_rows(random_tensor({rows, cols}, seed));
}

/// One-hot rows chosen by random cluster assignment.  Gram entries of such
/// features are exactly 0 or 1, the regime where joint entropies reduce
/// without residue.
inline Tensor indicator_features(std::size_t rows, std::size_t clusters,
                                 std::uint64_t seed) {
    CounterRng rng(seed);
    Tensor f({rows, clusters});
    for (std::size_t r = 0; r < rows; ++r)
        f.at(r, rng.next_u64() % clusters) = 1.0;
    return f;
}

inline std::vector<double> eigen_eigenvalues(const Tensor& t) {
    std::size_t n = t.shape()[0];
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = t.at(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = es.eigenvalues()[i];
    return out;
}

/// Direct spectral-entropy formula on an independent eigensolver.
inline double entropy_oracle_bits(const GramMatrix& a, double alpha) {
    double sum = 0.0;
    for (double l : eigen_eigenvalues(a.entries)) {
        if (l <= 0.0) continue;
        sum += std::pow(l, alpha);
    }
    return std::log2(sum) / (1.0 - alpha);
}

struct CliResult {
    int code = -1;
    std::string out;
};

inline CliResult run_cli(const std::string& args) {
    std::string cmd = std::string(INFOGRAM_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    CliResult r;
    if (!pipe) return r;
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    int status = pclose(pipe);
    if (WIFEXITED(status)) r.code = WEXITSTATUS(status);
    return r;
}

class TempDir {
public:
    TempDir() {
        std::string templ = "/tmp/infogram_test_XXXXXX";
        std::vector<char> buf(templ.begin(), templ.end());
        buf.push_back('\0');
        path_ = mkdtemp(buf.data());
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return path_ + "/" + name; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

inline void write_bytes(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<char> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace testutil
