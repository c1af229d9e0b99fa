#include "aya/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aya::numerics {

std::string_view to_string(DType dtype)
{
    return dtype == DType::f32 ? "f32" : "f64";
}

DType parse_dtype(std::string_view name)
{
    if (name == "f32") {
        return DType::f32;
    }
    if (name == "f64") {
        return DType::f64;
    }
    throw InputError("bad_dtype", "unknown dtype '" + std::string(name) + "'");
}

std::size_t element_count(const Shape& shape)
{
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_string(const Shape& shape)
{
    std::ostringstream ss;
    ss << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        ss << (i ? "," : "") << shape[i];
    }
    ss << ']';
    return ss.str();
}

Tensor::Tensor(Shape shape, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype), data_(element_count(shape_), 0.0)
{
}

Tensor::Tensor(Shape shape, std::vector<double> values, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype), data_(std::move(values))
{
    if (element_count(shape_) != data_.size()) {
        throw ShapeError("tensor of shape " + shape_string(shape_) + " given "
                         + std::to_string(data_.size()) + " values");
    }
    settle("tensor");
}

std::size_t Tensor::dim(std::size_t axis) const
{
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
    }
    return shape_[axis];
}

std::span<double> Tensor::row(std::size_t r)
{
    const std::size_t c = shape_.back();
    return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Tensor::row(std::size_t r) const
{
    const std::size_t c = shape_.back();
    return std::span<const double>(data_).subspan(r * c, c);
}

double Tensor::item() const
{
    if (data_.size() != 1) {
        throw ShapeError("item() on tensor of shape " + shape_string(shape_));
    }
    return data_[0];
}

void Tensor::fill(double value)
{
    std::fill(data_.begin(), data_.end(), round_to(dtype_, value));
}

Tensor Tensor::reshaped(Shape shape) const
{
    if (element_count(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    Tensor out = *this;
    out.shape_ = std::move(shape);
    return out;
}

Tensor Tensor::cast(DType dtype) const
{
    Tensor out = *this;
    out.dtype_ = dtype;
    out.settle("cast");
    return out;
}

Tensor& Tensor::settle(std::string_view op)
{
    if (dtype_ == DType::f32) {
        for (double& x : data_) {
            x = static_cast<double>(static_cast<float>(x));
        }
    }
    if (!all_finite()) {
        throw NumericError("non-finite value produced by " + std::string(op));
    }
    return *this;
}

bool Tensor::all_finite() const
{
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op)
{
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and "
                         + shape_string(b.shape()) + " differ");
    }
}

void require_rank(const Tensor& t, std::size_t rank, std::string_view op)
{
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape "
                         + shape_string(t.shape()));
    }
}

} // namespace aya::numerics
