#include "dsr/neuro.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dsr::neuro {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) { Layout(); }

Mlp::Mlp(std::vector<int> sizes, Rng& rng) : sizes_(std::move(sizes)) {
  Layout();
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    auto w = Weight(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.Uniform(-bound, bound);
    }
    auto b = Bias(l);
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = rng.Uniform(-bound, bound);
  }
}

void Mlp::Layout() {
  if (sizes_.size() < 2) throw std::invalid_argument("network needs at least input and output sizes");
  for (int s : sizes_) {
    if (s < 1) throw std::invalid_argument("layer sizes must be positive");
  }
  offsets_.clear();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    const auto in = static_cast<std::size_t>(sizes_[l]);
    const auto out = static_cast<std::size_t>(sizes_[l + 1]);
    total += in * out + out;
  }
  params_.assign(total, 0.0);
}

Eigen::Map<RowMatrix> Mlp::Weight(std::size_t l) {
  return {params_.data() + offsets_.at(l), sizes_[l + 1], sizes_[l]};
}

Eigen::Map<const RowMatrix> Mlp::Weight(std::size_t l) const {
  return {params_.data() + offsets_.at(l), sizes_[l + 1], sizes_[l]};
}

Eigen::Map<Vector> Mlp::Bias(std::size_t l) {
  return {params_.data() + offsets_.at(l) + static_cast<std::size_t>(sizes_[l] * sizes_[l + 1]),
          sizes_[l + 1]};
}

Eigen::Map<const Vector> Mlp::Bias(std::size_t l) const {
  return {params_.data() + offsets_.at(l) + static_cast<std::size_t>(sizes_[l] * sizes_[l + 1]),
          sizes_[l + 1]};
}

Matrix Mlp::Forward(const Matrix& x, Cache* cache) const {
  if (x.rows() != input_size()) throw std::invalid_argument("forward: input size mismatch");
  if (cache) {
    cache->acts.clear();
    cache->acts.reserve(num_layers() + 1);
    cache->acts.push_back(x);
  }
  Matrix a = x;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    Matrix z = Weight(l) * a;
    z.colwise() += Bias(l);
    if (l + 1 < num_layers()) z = z.cwiseMax(0.0);
    a = std::move(z);
    if (cache) cache->acts.push_back(a);
  }
  return a;
}

Vector Mlp::Forward(const Vector& x) const {
  return Forward(Matrix(x), nullptr).col(0);
}

Matrix Mlp::BackwardInto(const Cache& cache, const Matrix& dy, std::span<double> grad_accum) const {
  if (cache.acts.size() != num_layers() + 1) throw std::invalid_argument("backward: stale cache");
  if (grad_accum.size() != params_.size()) throw std::invalid_argument("backward: gradient size mismatch");
  if (dy.rows() != output_size() || dy.cols() != cache.acts.back().cols()) {
    throw std::invalid_argument("backward: output gradient shape mismatch");
  }
  Matrix delta = dy;
  for (std::size_t l = num_layers(); l-- > 0;) {
    if (l + 1 < num_layers()) {
      // ReLU mask from the post-activation output.
      delta = delta.cwiseProduct((cache.acts[l + 1].array() > 0.0).cast<double>().matrix());
    }
    const Matrix& in = cache.acts[l];
    Eigen::Map<RowMatrix> dw(grad_accum.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
    Eigen::Map<Vector> db(grad_accum.data() + offsets_[l] +
                              static_cast<std::size_t>(sizes_[l] * sizes_[l + 1]),
                          sizes_[l + 1]);
    dw.noalias() += delta * in.transpose();
    db.noalias() += delta.rowwise().sum();
    delta = Weight(l).transpose() * delta;
  }
  return delta;
}

Mlp::Gradients Mlp::Backward(const Cache& cache, const Matrix& dy) const {
  Gradients g;
  g.params.assign(params_.size(), 0.0);
  g.input = BackwardInto(cache, dy, g.params);
  return g;
}

void Mlp::CopyFrom(const Mlp& src) {
  if (src.sizes_ != sizes_) throw std::invalid_argument("copy_params: architecture mismatch");
  if (&src == this) return;
  params_ = src.params_;
}

bool Mlp::AllFinite() const {
  return std::all_of(params_.begin(), params_.end(), [](double p) { return std::isfinite(p); });
}

Adam::Adam(AdamConfig cfg, std::vector<std::size_t> tensor_sizes) : cfg_(cfg) {
  for (std::size_t n : tensor_sizes) {
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  }
}

double Adam::GlobalNorm(std::span<const std::span<const double>> grads) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double x : g) sq += x * x;
  }
  return std::sqrt(sq);
}

double Adam::Step(std::span<const std::span<double>> params,
                  std::span<const std::span<const double>> grads, double clip_norm) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("adam: tensor count mismatch");
  }
  for (std::size_t t = 0; t < m_.size(); ++t) {
    if (params[t].size() != m_[t].size() || grads[t].size() != m_[t].size()) {
      throw std::invalid_argument("adam: tensor shape mismatch");
    }
  }
  const double norm = GlobalNorm(grads);
  if (!std::isfinite(norm)) throw std::domain_error("adam: non-finite gradient");
  const double scale = (std::isfinite(clip_norm) && norm > clip_norm) ? clip_norm / norm : 1.0;

  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (std::size_t t = 0; t < m_.size(); ++t) {
    auto& m = m_[t];
    auto& v = v_[t];
    const auto& g = grads[t];
    auto& p = params[t];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double gi = g[i] * scale;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  for (const auto& p : params) {
    for (double x : p) {
      if (!std::isfinite(x)) throw std::domain_error("adam: parameter became non-finite");
    }
  }
  return norm;
}

double Adam::Step(Mlp& net, std::span<const double> grads, double clip_norm) {
  const std::span<double> p[] = {net.params()};
  const std::span<const double> g[] = {grads};
  return Step(p, g, clip_norm);
}

namespace {

constexpr char kMagic[8] = {'D', 'S', 'R', 'M', 'L', 'P', '0', '1'};

void PutU64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t GetU64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void WriteMlp(std::ostream& out, const Mlp& net) {
  out.write(kMagic, sizeof(kMagic));
  PutU64(out, net.sizes().size());
  for (int s : net.sizes()) PutU64(out, static_cast<std::uint64_t>(s));
  PutU64(out, net.param_count());
  for (double p : net.params()) PutU64(out, std::bit_cast<std::uint64_t>(p));
  if (!out) throw std::runtime_error("checkpoint write failed");
}

Mlp ReadMlp(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad network header");
  }
  const auto n_sizes = GetU64(in);
  if (n_sizes < 2 || n_sizes > 64) throw std::runtime_error("checkpoint: bad layer count");
  std::vector<int> sizes;
  for (std::uint64_t i = 0; i < n_sizes; ++i) {
    const auto s = GetU64(in);
    if (s == 0 || s > (1u << 24)) throw std::runtime_error("checkpoint: bad layer size");
    sizes.push_back(static_cast<int>(s));
  }
  Mlp net(sizes);
  if (GetU64(in) != net.param_count()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (double& p : net.params()) p = std::bit_cast<double>(GetU64(in));
  return net;
}

}  // namespace dsr::neuro
