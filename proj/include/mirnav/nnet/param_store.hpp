#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mirnav/errors.hpp"

namespace mirnav::nnet {

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class S>
struct ParamArray {
  std::string name;
  bool trainable = true;
  Mat<S> value;

  Eigen::Index size() const { return value.size(); }
};

// Named parameter arrays with fixed shapes. Non-trainable arrays hold
// spectral-norm power-iteration vectors.
template <class S>
class ParamStore {
 public:
  int add(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool trainable = true) {
    require(!index_.count(name), "duplicate parameter name " + name);
    index_[name] = static_cast<int>(arrays_.size());
    arrays_.push_back({name, trainable, Mat<S>::Zero(rows, cols)});
    return static_cast<int>(arrays_.size()) - 1;
  }

  int size() const { return static_cast<int>(arrays_.size()); }
  ParamArray<S>& operator[](int i) { return arrays_[static_cast<std::size_t>(i)]; }
  const ParamArray<S>& operator[](int i) const { return arrays_[static_cast<std::size_t>(i)]; }
  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }
  int at(const std::string& name) const {
    int i = find(name);
    require(i >= 0, "unknown parameter " + name);
    return i;
  }

  std::uint64_t version() const { return version_; }
  void set_version(std::uint64_t v) { version_ = v; }
  void bump_version() { ++version_; }

  Eigen::Index trainable_count() const {
    Eigen::Index n = 0;
    for (const auto& a : arrays_)
      if (a.trainable) n += a.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& a : arrays_)
      if (!a.value.allFinite()) return false;
    return true;
  }

  bool same_layout(const ParamStore& o) const {
    if (o.size() != size()) return false;
    for (int i = 0; i < size(); ++i)
      if (o[i].name != (*this)[i].name || o[i].value.rows() != (*this)[i].value.rows() ||
          o[i].value.cols() != (*this)[i].value.cols() || o[i].trainable != (*this)[i].trainable)
        return false;
    return true;
  }

  // Same names and shapes, zero values.
  ParamStore layout_clone() const {
    ParamStore out;
    for (const auto& a : arrays_) out.add(a.name, a.value.rows(), a.value.cols(), a.trainable);
    return out;
  }

  template <class T>
  ParamStore<T> cast() const {
    ParamStore<T> out;
    for (const auto& a : arrays_) {
      int i = out.add(a.name, a.value.rows(), a.value.cols(), a.trainable);
      out[i].value = a.value.template cast<T>();
    }
    out.set_version(version_);
    return out;
  }

 private:
  std::vector<ParamArray<S>> arrays_;
  std::map<std::string, int> index_;
  std::uint64_t version_ = 0;
};

// Gradient arrays aligned 1:1 with a ParamStore.
template <class S>
class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(const ParamStore<S>& p) {
    grads_.reserve(static_cast<std::size_t>(p.size()));
    for (int i = 0; i < p.size(); ++i) grads_.push_back(Mat<S>::Zero(p[i].value.rows(), p[i].value.cols()));
  }

  int size() const { return static_cast<int>(grads_.size()); }
  Mat<S>& operator[](int i) { return grads_[static_cast<std::size_t>(i)]; }
  const Mat<S>& operator[](int i) const { return grads_[static_cast<std::size_t>(i)]; }

  void zero() {
    for (auto& g : grads_) g.setZero();
  }
  void add(const GradientSet& o, S scale = S(1)) {
    require(o.size() == size(), "gradient set size mismatch");
    for (int i = 0; i < size(); ++i) (*this)[i] += scale * o[i];
  }
  void scale(S s) {
    for (auto& g : grads_) g *= s;
  }
  S global_norm() const {
    double sq = 0;
    for (const auto& g : grads_) sq += static_cast<double>(g.squaredNorm());
    return static_cast<S>(std::sqrt(sq));
  }
  bool all_finite() const {
    for (const auto& g : grads_)
      if (!g.allFinite()) return false;
    return true;
  }
  // Rescales so the global norm is at most `max_norm`; returns the pre-clip norm.
  S clip_global_norm(S max_norm) {
    S n = global_norm();
    if (n > max_norm && n > S(0)) scale(max_norm / n);
    return n;
  }

 private:
  std::vector<Mat<S>> grads_;
};

// Orthogonal initialisation (QR of a Gaussian matrix, sign-corrected).
template <class S, class Rng>
void orthogonal_init(Mat<S>& w, Rng& rng, double gain = 1.0) {
  const Eigen::Index r = w.rows();
  const Eigen::Index c = w.cols();
  const Eigen::Index big = std::max(r, c);
  const Eigen::Index small = std::min(r, c);
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXd g(big, small);
  for (Eigen::Index i = 0; i < big; ++i)
    for (Eigen::Index j = 0; j < small; ++j) g(i, j) = n01(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  Eigen::MatrixXd rr = qr.matrixQR().topLeftCorner(small, small);
  for (Eigen::Index j = 0; j < small; ++j)
    if (rr(j, j) < 0) q.col(j) *= -1.0;
  Eigen::MatrixXd out = (r >= c) ? q : Eigen::MatrixXd(q.transpose());
  w = (gain * out).cast<S>();
}

}  // namespace mirnav::nnet
