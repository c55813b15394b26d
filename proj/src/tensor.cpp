#include "infogram/tensor.hpp"

#include <cmath>

#include "infogram/error.hpp"

namespace infogram {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_numel(shape_) != data_.size())
        throw ShapeError("tensor: shape product " +
                         std::to_string(shape_numel(shape_)) +
                         " does not match buffer length " +
                         std::to_string(data_.size()));
    check_finite("tensor");
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size())
        throw ShapeError("tensor: axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(rank()));
    return shape_[axis];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    if (rank() != 2) throw ShapeError("tensor: 2-d access on rank " + std::to_string(rank()));
    return data_[r * shape_[1] + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    if (rank() != 2) throw ShapeError("tensor: 2-d access on rank " + std::to_string(rank()));
    return data_[r * shape_[1] + c];
}

double Tensor::value() const {
    if (!is_scalar()) throw ShapeError("tensor: value() on a non-scalar");
    return data_[0];
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    if (shape_numel(shape) != data_.size())
        throw ShapeError("tensor: reshape changes element count");
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
}

void Tensor::check_finite(const std::string& what) const {
    for (double v : data_)
        if (!std::isfinite(v))
            throw NumericError(what + ": non-finite value");
}

Tensor flatten_batch(const Tensor& t) {
    if (t.rank() < 2)
        throw ShapeError("flatten_batch: rank " + std::to_string(t.rank()) +
                         " input, need at least 2");
    std::size_t b = t.shape()[0];
    std::size_t m = 1;
    for (std::size_t i = 1; i < t.rank(); ++i) m *= t.shape()[i];
    return t.reshaped({b, m});
}

Tensor l2_normalize_rows(const Tensor& m) {
    if (m.rank() != 2)
        throw ShapeError("l2_normalize_rows: rank " + std::to_string(m.rank()) +
                         " input, need 2");
    std::size_t rows = m.shape()[0], cols = m.shape()[1];
    Tensor out({rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            double v = m.at(r, c);
            sq += v * v;
        }
        double norm = std::sqrt(sq);
        if (norm <= 1e-12)
            throw DegenerateError("l2_normalize_rows: row " + std::to_string(r) +
                                  " has norm " + std::to_string(norm));
        for (std::size_t c = 0; c < cols; ++c)
            out.at(r, c) = m.at(r, c) / norm;
    }
    return out;
}

} // namespace infogram
