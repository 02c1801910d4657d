#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace scbf {

/// Anderson mixing for a fixed-point map y -> g(y). Each call records one
/// evaluation and returns the next point; the history restarts whenever the
/// residual g(y) - y grows.
class AndersonMixer {
 public:
  explicit AndersonMixer(int depth) : depth_(depth) {}

  Eigen::VectorXd next(const Eigen::VectorXd& y, const Eigen::VectorXd& g) {
    const Eigen::VectorXd residual = g - y;
    if (residual.norm() > last_residual_) reset();
    last_residual_ = residual.norm();
    hist_g_.push_back(g);
    hist_r_.push_back(residual);
    if (static_cast<int>(hist_r_.size()) > depth_ + 1) {
      hist_g_.erase(hist_g_.begin());
      hist_r_.erase(hist_r_.begin());
    }
    const int h = static_cast<int>(hist_r_.size());
    if (h < 2) return g;
    // min |sum a_i r_i| with sum a_i = 1, via differences to the newest residual.
    Eigen::MatrixXd D(residual.size(), h - 1);
    Eigen::MatrixXd E(residual.size(), h - 1);
    for (int i = 0; i < h - 1; ++i) {
      D.col(i) = hist_r_[i] - residual;
      E.col(i) = hist_g_[i] - g;
    }
    const Eigen::VectorXd w = D.completeOrthogonalDecomposition().solve(-residual);
    return w.allFinite() ? Eigen::VectorXd(g + E * w) : g;
  }

  void reset() {
    hist_g_.clear();
    hist_r_.clear();
    last_residual_ = std::numeric_limits<double>::infinity();
  }

 private:
  int depth_;
  std::vector<Eigen::VectorXd> hist_g_;
  std::vector<Eigen::VectorXd> hist_r_;
  double last_residual_ = std::numeric_limits<double>::infinity();
};

}  // namespace scbf
