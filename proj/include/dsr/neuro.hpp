#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dsr/rng.hpp"

namespace dsr::neuro {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense feedforward network: ReLU on hidden layers, identity output.
///
/// Parameters live in one flat buffer. Layer l stores its weight as a
/// row-major (out x in) block followed by its bias (out). Batched inputs are
/// column-major matrices with one sample per column.
class Mlp {
 public:
  struct Cache {
    /// acts[0] is the input; acts[l + 1] is layer l's post-activation output.
    std::vector<Matrix> acts;
  };

  struct Gradients {
    std::vector<double> params;
    Matrix input;
  };

  /// Zero-initialized network.
  explicit Mlp(std::vector<int> sizes);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization for all parameters.
  Mlp(std::vector<int> sizes, Rng& rng);

  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  Eigen::Map<RowMatrix> Weight(std::size_t layer);
  Eigen::Map<const RowMatrix> Weight(std::size_t layer) const;
  Eigen::Map<Vector> Bias(std::size_t layer);
  Eigen::Map<const Vector> Bias(std::size_t layer) const;

  /// Batched forward; x is input_size x batch. Fills `cache` when given.
  Matrix Forward(const Matrix& x, Cache* cache = nullptr) const;
  Vector Forward(const Vector& x) const;

  /// Reverse pass for the scalar <dy, y>. Parameter gradients are added into
  /// `grad_accum` (length param_count()); returns the input gradient.
  Matrix BackwardInto(const Cache& cache, const Matrix& dy, std::span<double> grad_accum) const;
  Gradients Backward(const Cache& cache, const Matrix& dy) const;

  /// Copies parameters from a network with identical layer sizes.
  void CopyFrom(const Mlp& src);

  bool AllFinite() const;

 private:
  void Layout();

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;  // start of each layer's weight block
  std::vector<double> params_;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed list of parameter tensors, with global-norm clipping.
class Adam {
 public:
  Adam(AdamConfig cfg, std::vector<std::size_t> tensor_sizes);

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return steps_; }

  /// Clips the joint L2 norm of `grads` to clip_norm (no clipping when
  /// clip_norm is infinite), then applies one Adam update. Throws
  /// std::domain_error on non-finite gradients without touching state.
  /// Returns the pre-clip gradient norm.
  double Step(std::span<const std::span<double>> params,
              std::span<const std::span<const double>> grads, double clip_norm);

  /// Single-network convenience.
  double Step(Mlp& net, std::span<const double> grads, double clip_norm);

  static double GlobalNorm(std::span<const std::span<const double>> grads);

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t steps_ = 0;
};

/// Binary record: "DSRMLP01", u64 layer-size count, u64 sizes, u64 parameter
/// count, then little-endian f64 parameters.
void WriteMlp(std::ostream& out, const Mlp& net);
Mlp ReadMlp(std::istream& in);

}  // namespace dsr::neuro
