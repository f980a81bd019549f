#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jtner {

/// Dense row-major tensor of 64-bit floats. The whole library runs on
/// doubles; at desk scale precision is worth more than speed and it keeps
/// finite-difference gradient checks tight.
///
/// A scalar is represented by an empty shape (one element).
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    bool requires_grad = false;
    // Filled by Tape::backward for bound parameters; same length as data.
    std::optional<std::vector<double>> grad;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);  // zero-filled
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double v);

    std::int64_t size() const;
    bool is_scalar() const { return size() == 1 && shape.empty(); }

    // 2-D accessors; only valid when shape.size() == 2.
    int rows() const { return shape[0]; }
    int cols() const { return shape[1]; }
    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

}  // namespace jtner
