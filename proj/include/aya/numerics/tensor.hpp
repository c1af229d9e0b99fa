#pragma once

#include "aya/common/error.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aya::numerics {

enum class DType : std::uint8_t { f32, f64 };

std::string_view to_string(DType dtype);
DType parse_dtype(std::string_view name);

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public InputError {
public:
    explicit ShapeError(const std::string& message) : InputError("shape_mismatch", message) {}
};

class NumericError : public InternalError {
public:
    explicit NumericError(const std::string& message) : InternalError("non_finite", message) {}
};

// Dense row-major tensor. Storage is always double; an f32 tensor holds values
// that are exactly representable as float, and `settle()` re-establishes that
// after every kernel writes into it.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, DType dtype = DType::f32);
    Tensor(Shape shape, std::vector<double> values, DType dtype = DType::f32);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_, other.dtype_); }
    static Tensor scalar(double value, DType dtype = DType::f32) { return Tensor({1}, {value}, dtype); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    DType dtype() const noexcept { return dtype_; }

    // Rank-2 helpers.
    std::size_t rows() const { return dim(0); }
    std::size_t cols() const { return dim(1); }
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    std::span<double> row(std::size_t r);
    std::span<const double> row(std::size_t r) const;

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double item() const;

    void fill(double value);
    Tensor reshaped(Shape shape) const;
    Tensor cast(DType dtype) const;

    // Rounds to dtype precision and rejects NaN/Inf. `op` names the producer
    // in the error message.
    Tensor& settle(std::string_view op);
    bool all_finite() const;

    friend bool operator==(const Tensor& a, const Tensor& b)
    {
        return a.dtype_ == b.dtype_ && a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    DType dtype_ = DType::f32;
    std::vector<double> data_;
};

inline double round_to(DType dtype, double value)
{
    return dtype == DType::f32 ? static_cast<double>(static_cast<float>(value)) : value;
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op);
void require_rank(const Tensor& t, std::size_t rank, std::string_view op);

} // namespace aya::numerics
