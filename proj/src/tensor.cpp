#include "poseforge/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace poseforge {

std::int64_t shape_size(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), values_(static_cast<std::size_t>(shape_size(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_size(shape_) != static_cast<std::int64_t>(values_.size()))
        throw std::invalid_argument("tensor shape " + shape_str(shape_) + " does not match value count");
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    for (auto& v : t.values_) v = value;
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

int Tensor::rows() const {
    if (rank() != 2) throw std::logic_error("rows() on tensor of shape " + shape_str(shape_));
    return shape_[0];
}

int Tensor::cols() const {
    if (rank() != 2) throw std::logic_error("cols() on tensor of shape " + shape_str(shape_));
    return shape_[1];
}

double& Tensor::at(int r, int c) { return values_[static_cast<std::size_t>(r) * shape_[1] + c]; }
double Tensor::at(int r, int c) const { return values_[static_cast<std::size_t>(r) * shape_[1] + c]; }

bool Tensor::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (shape_size(shape) != size())
        throw std::invalid_argument("reshape " + shape_str(shape_) + " -> " + shape_str(shape) + " changes size");
    return Tensor(std::move(shape), values_);
}

void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw std::runtime_error(std::string("non-finite values in ") + what);
}

}  // namespace poseforge
