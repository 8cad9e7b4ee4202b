#include "pgmel/tensor.hpp"

#include <sstream>

namespace pgmel {

namespace {

Eigen::Index checked_count(const std::vector<Eigen::Index>& shape) {
  if (shape.empty() || shape.size() > 2) {
    throw ContractViolation("tensor rank must be 1 or 2");
  }
  Eigen::Index n = 1;
  for (auto d : shape) {
    if (d <= 0) throw ContractViolation("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor Tensor::zeros(std::vector<Eigen::Index> shape) {
  Eigen::Index n = checked_count(shape);
  return Tensor(std::move(shape), Vec::Zero(n));
}

Tensor Tensor::constant(std::vector<Eigen::Index> shape, double v) {
  Eigen::Index n = checked_count(shape);
  return Tensor(std::move(shape), Vec::Constant(n, v));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, Vec::Constant(1, v)); }

Tensor Tensor::from_vec(Vec v) {
  if (v.size() == 0) throw ContractViolation("empty vector");
  Eigen::Index n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::from_mat(const RowMat& m) {
  if (m.size() == 0) throw ContractViolation("empty matrix");
  Vec flat = Eigen::Map<const Vec>(m.data(), m.size());
  return Tensor({m.rows(), m.cols()}, std::move(flat));
}

double Tensor::scalar_value() const {
  if (size() != 1) {
    throw ContractViolation("expected scalar tensor, got shape " + shape_str());
  }
  return data_[0];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ",";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

}  // namespace pgmel
