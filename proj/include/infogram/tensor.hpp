#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace infogram {

/// Dense row-major tensor of doubles.  Public constructors validate that
/// the buffer length matches the shape product and that every value is
/// finite.
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::size_t> shape);

    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    bool is_scalar() const { return data_.size() == 1; }

    std::size_t dim(std::size_t axis) const;

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// 2-d element access; the tensor must have rank 2.
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    /// Scalar value of a one-element tensor.
    double value() const;

    /// Same data under a new shape with an equal element count.
    Tensor reshaped(std::vector<std::size_t> shape) const;

    /// Throws NumericError if any entry is NaN or infinite.
    void check_finite(const std::string& what) const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

/// Reads a little-endian NPY v1.0 file holding float32 or float64 data;
/// float32 payloads are widened to double.
Tensor load_tensor(const std::string& path);

/// Writes NPY v1.0, '<f8', C order, header padded to a 64-byte boundary.
void save_tensor(const Tensor& t, const std::string& path);

/// Collapses every axis after the first: [B, d1, ..., dk] -> [B, d1*...*dk].
Tensor flatten_batch(const Tensor& t);

/// Scales every row of a 2-d tensor to unit Euclidean norm.
Tensor l2_normalize_rows(const Tensor& m);

} // namespace infogram
