#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgmel {

using Vec = Eigen::VectorXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

/// Precondition or shape-contract failure; a caller bug, not a data problem.
struct ContractViolation : std::logic_error {
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

/// NaN/Inf escaped a computation; carries the offending operation name.
struct NumericFault : std::runtime_error {
  explicit NumericFault(const std::string& what) : std::runtime_error(what) {}
};

/// Dense rank-1 or rank-2 array of doubles, row-major storage.
/// Scalars are rank-1 tensors of length 1.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<Eigen::Index> shape);
  static Tensor scalar(double v);
  static Tensor from_vec(Vec v);                 // rank 1
  static Tensor from_mat(const RowMat& m);       // rank 2
  static Tensor constant(std::vector<Eigen::Index> shape, double v);

  const std::vector<Eigen::Index>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return shape_.empty(); }

  // Rank-2 row/col counts; a rank-1 tensor reads as a 1 x n row.
  Eigen::Index rows() const { return rank() == 2 ? shape_[0] : 1; }
  Eigen::Index cols() const { return rank() == 2 ? shape_[1] : shape_[0]; }

  MatMap mat() { return MatMap(data_.data(), rows(), cols()); }
  ConstMatMap mat() const { return ConstMatMap(data_.data(), rows(), cols()); }

  Vec& data() { return data_; }
  const Vec& data() const { return data_; }

  double& operator[](Eigen::Index i) { return data_[i]; }
  double operator[](Eigen::Index i) const { return data_[i]; }

  double scalar_value() const;
  bool all_finite() const { return data_.allFinite(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

 private:
  Tensor(std::vector<Eigen::Index> shape, Vec data)
      : shape_(std::move(shape)), data_(std::move(data)) {}

  std::vector<Eigen::Index> shape_;
  Vec data_;
};

inline bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && a.data() == b.data();
}

}  // namespace pgmel
