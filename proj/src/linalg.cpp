#include "infogram/linalg.hpp"

#include "infogram/error.hpp"

namespace infogram {

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: both operands must be 2-d");
    std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    if (b.shape()[0] != k)
        throw ShapeError("matmul: inner dimensions " + std::to_string(k) +
                         " and " + std::to_string(b.shape()[0]) + " differ");
    Tensor c({n, m});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            double av = pa[i * k + l];
            if (av == 0.0) continue;
            const double* brow = pb + l * m;
            double* crow = pc + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul_nt: both operands must be 2-d");
    std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[0];
    if (b.shape()[1] != k)
        throw ShapeError("matmul_nt: column counts " + std::to_string(k) +
                         " and " + std::to_string(b.shape()[1]) + " differ");
    Tensor c({n, m});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            const double* ra = a.data().data() + i * k;
            const double* rb = b.data().data() + j * k;
            for (std::size_t l = 0; l < k; ++l) s += ra[l] * rb[l];
            c.at(i, j) = s;
        }
    return c;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: operand must be 2-d");
    std::size_t n = a.shape()[0], m = a.shape()[1];
    Tensor t({m, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

double inner(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeError("inner: shapes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace infogram
