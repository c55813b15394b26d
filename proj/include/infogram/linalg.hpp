#pragma once

#include "infogram/tensor.hpp"

namespace infogram {

/// C = A * B for 2-d tensors.
Tensor matmul(const Tensor& a, const Tensor& b);

/// C = A * B^T for 2-d tensors with matching column counts.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

/// Sum of elementwise products; shapes must match.
double inner(const Tensor& a, const Tensor& b);

} // namespace infogram
