#pragma once

// Value types shared by the statistics, model, and discovery layers.

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "faithful/error.hpp"
#include "faithful/graph.hpp"

namespace faithful {

/// Symmetric, unit-diagonal, positive semi-definite matrix with labeled rows.
class CorrelationMatrix {
 public:
  static constexpr double kSymmetryTol = 1e-12;
  static constexpr double kDiagonalTol = 1e-12;
  static constexpr double kPsdTol = 1e-10;

  CorrelationMatrix() = default;

  CorrelationMatrix(std::vector<std::string> labels, Eigen::MatrixXd values)
      : labels_(std::move(labels)), values_(std::move(values)) {
    detail::check_unique_labels(labels_);
    const auto p = static_cast<Eigen::Index>(labels_.size());
    if (p == 0) throw InvalidArgument("correlation matrix needs at least one variable");
    if (values_.rows() != p || values_.cols() != p)
      throw InvalidArgument("correlation matrix shape does not match its labels");
    for (Eigen::Index i = 0; i < p; ++i) {
      if (std::abs(values_(i, i) - 1.0) > kDiagonalTol)
        throw InvalidArgument("correlation matrix diagonal entry " + labels_[i] + " is not 1");
      values_(i, i) = 1.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (!std::isfinite(values_(i, j))) throw InvalidArgument("non-finite correlation entry");
        if (std::abs(values_(i, j) - values_(j, i)) > kSymmetryTol)
          throw InvalidArgument("correlation matrix is not symmetric");
      }
    }
    values_ = 0.5 * (values_ + values_.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(values_, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -kPsdTol)
      throw InvalidArgument("correlation matrix is not positive semi-definite");
  }

  static CorrelationMatrix identity(std::vector<std::string> labels) {
    const auto p = static_cast<Eigen::Index>(labels.size());
    return CorrelationMatrix(std::move(labels), Eigen::MatrixXd::Identity(p, p));
  }

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t index_of(std::string_view label) const { return detail::find_label(labels_, label); }
  double operator()(std::size_t i, std::size_t j) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  double at(std::string_view a, std::string_view b) const { return (*this)(index_of(a), index_of(b)); }
  const Eigen::MatrixXd& matrix() const noexcept { return values_; }

  bool is_positive_definite() const {
    Eigen::LLT<Eigen::MatrixXd> llt(values_);
    return llt.info() == Eigen::Success;
  }

  friend bool operator==(const CorrelationMatrix& x, const CorrelationMatrix& y) {
    return x.labels_ == y.labels_ && x.values_ == y.values_;
  }

 private:
  std::vector<std::string> labels_;
  Eigen::MatrixXd values_;
};

/// n x p sample with labeled columns; one row per draw.
class DataMatrix {
 public:
  DataMatrix() = default;

  DataMatrix(std::vector<std::string> labels, Eigen::MatrixXd values)
      : labels_(std::move(labels)), values_(std::move(values)) {
    detail::check_unique_labels(labels_);
    if (values_.rows() < 1) throw InvalidArgument("data matrix needs at least one row");
    if (values_.cols() != static_cast<Eigen::Index>(labels_.size()))
      throw InvalidArgument("data matrix column count does not match its labels");
    if (!values_.allFinite()) throw InvalidArgument("data matrix contains non-finite values");
  }

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t index_of(std::string_view label) const { return detail::find_label(labels_, label); }
  const Eigen::MatrixXd& values() const noexcept { return values_; }

  friend bool operator==(const DataMatrix& x, const DataMatrix& y) {
    return x.labels_ == y.labels_ && x.values_ == y.values_;
  }

 private:
  std::vector<std::string> labels_;
  Eigen::MatrixXd values_;
};

}  // namespace faithful
