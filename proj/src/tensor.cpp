#include "eegatt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eegatt/error.hpp"

namespace eegatt {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kGeneric: return "generic";
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kUnknownModel: return "unknown_model";
    case ErrorCode::kFormat: return "malformed_container";
    case ErrorCode::kMissingClass: return "missing_class";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kState: return "state";
    case ErrorCode::kLabel: return "label";
    case ErrorCode::kLookup: return "lookup";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kTraining: return "training";
    case ErrorCode::kPreprocess: return "preprocess";
    case ErrorCode::kStructure: return "structure";
  }
  return "unknown";
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(values.begin(), values.end()) {
  if (shape_size(shape_) != data_.size()) {
    fail(ErrorCode::kDimension, "tensor shape " + shape_str(shape_) + " does not match " +
                                    std::to_string(data_.size()) + " values");
  }
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) fail(ErrorCode::kDimension, "index rank mismatch");
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) fail(ErrorCode::kDimension, "index out of range on axis " + std::to_string(axis));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != data_.size()) {
    fail(ErrorCode::kDimension, "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  shape_ = std::move(shape);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace eegatt
