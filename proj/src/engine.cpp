#include "abidnn/engine.hpp"

#include <algorithm>
#include <string>

#include "abidnn/errors.hpp"

namespace abidnn {

Engine::Engine(const Network& net, const KernelTable& kernels, std::size_t chunk)
    : kt_(&kernels), kind_(net.kind), dim_(net.input_dim), chunk_(std::max<std::size_t>(chunk, 1)) {
  net.validate();
  n_params_ = net.param_count();
  std::size_t off = 0;
  for (const auto& st : net.stacks) {
    for (const auto& b : st.blocks) {
      blocks_.push_back({st.dimension, b.width(), off, b.activation, b.frozen});
      off += b.param_count();
    }
  }
  for (const auto& l : net.layers) {
    layers_.push_back({l.in, l.out, off, l.activation});
    off += l.param_count();
  }
  relu_ = net.activation == Activation::relu;
  acts_.resize(layers_.size() + 1);
  pre_.resize(layers_.size());
}

namespace {

std::size_t directions(OperatorKind op, std::size_t dim) { return op == OperatorKind::identity ? 0 : dim; }

void check_batch(const ResidualBatch& batch, std::size_t dim, bool relu) {
  if (relu && batch.op != OperatorKind::identity) {
    throw ConfigurationError("operator " + std::string(to_string(batch.op)) +
                             " needs second derivatives, which vanish for ReLU networks; use tanh");
  }
  if (batch.points.size() != batch.targets.size() * dim) {
    throw DimensionMismatch("residual batch: " + std::to_string(batch.points.size()) + " coordinates for " +
                            std::to_string(batch.targets.size()) + " points of dimension " + std::to_string(dim));
  }
}

}  // namespace

void Engine::forward_chunk(std::span<const double> theta, const double* pts, std::size_t C, std::size_t K) {
  const std::size_t nc = 1 + 2 * K;
  const std::size_t L = nc * C;
  const double* th = theta.data();

  std::vector<double>& a0 = acts_[0];
  if (kind_ == NetworkKind::bidnn) {
    a0.assign(blocks_.size() * L, 0.0);
    std::size_t neurons = 0;
    for (const auto& b : blocks_) neurons += b.width;
    block_z1_.resize(neurons * C);
    block_y_.resize(neurons * C);
    z2_.resize(C);
    std::size_t nidx = 0;
    for (std::size_t f = 0; f < blocks_.size(); ++f) {
      const BlockInfo& b = blocks_[f];
      const std::size_t W = b.width;
      const double* w1 = th + b.offset;
      const double* b1 = w1 + W;
      const double* w2 = b1 + W;
      const double* b2 = w2 + W;
      const double* w3 = b2 + W;
      const double b3 = w3[W];
      double* v = a0.data() + f * L;
      double* d = K ? v + (1 + b.dimension) * C : nullptr;
      double* dd = K ? v + (1 + K + b.dimension) * C : nullptr;
      for (std::size_t q = 0; q < W; ++q, ++nidx) {
        double* z1 = block_z1_.data() + nidx * C;
        double* y = block_y_.data() + nidx * C;
        for (std::size_t p = 0; p < C; ++p) {
          z1[p] = pts[p * dim_ + b.dimension] * w1[q] + b1[q];
          z2_[p] = z1[p] * w2[q] + b2[q];
        }
        if (b.act == Activation::tanh) {
          kt_->tanh(z2_.data(), y, C);
        } else {
          for (std::size_t p = 0; p < C; ++p) y[p] = z2_[p] > 0.0 ? z2_[p] : 0.0;
        }
        for (std::size_t p = 0; p < C; ++p) v[p] += y[p] * w3[q];
        if (K) {
          const double c = w1[q] * w2[q];
          for (std::size_t p = 0; p < C; ++p) {
            double s1 = 1.0;
            double s2 = 0.0;
            if (b.act == Activation::tanh) {
              s1 = 1.0 - y[p] * y[p];
              s2 = -2.0 * y[p] * s1;
            } else {
              s1 = z2_[p] > 0.0 ? 1.0 : 0.0;
            }
            d[p] += (s1 * c) * w3[q];
            dd[p] += ((s2 * c) * c) * w3[q];
          }
        }
      }
      for (std::size_t p = 0; p < C; ++p) v[p] += b3;
    }
  } else {
    a0.assign(dim_ * L, 0.0);
    for (std::size_t k = 0; k < dim_; ++k) {
      double* row = a0.data() + k * L;
      for (std::size_t p = 0; p < C; ++p) row[p] = pts[p * dim_ + k];
      if (K) std::fill_n(row + (1 + k) * C, C, 1.0);
    }
  }

  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerInfo& li = layers_[l];
    std::vector<double>& z = pre_[l];
    z.resize(li.out * L);
    const double* w = th + li.offset;
    const double* bias = w + li.in * li.out;
    kt_->gemm_nn(li.out, L, li.in, w, li.in, acts_[l].data(), L, z.data(), L, false);
    for (std::size_t i = 0; i < li.out; ++i) {
      double* row = z.data() + i * L;
      for (std::size_t p = 0; p < C; ++p) row[p] += bias[i];
    }
    std::vector<double>& y = acts_[l + 1];
    if (li.act == Activation::identity) {
      y = z;
    } else {
      y.resize(li.out * L);
      for (std::size_t i = 0; i < li.out; ++i) kt_->jet_act_forward(li.act, z.data() + i * L, y.data() + i * L, C, K);
    }
  }
}

double Engine::chunk_residuals(OperatorKind op, const double* targets, std::size_t C, std::size_t K,
                               double* r) const {
  const double* u = acts_.back().data();
  double sum = 0.0;
  for (std::size_t p = 0; p < C; ++p) {
    double res = 0.0;
    switch (op) {
      case OperatorKind::identity:
        res = u[p] - targets[p];
        break;
      case OperatorKind::neg_laplacian: {
        double lap = 0.0;
        for (std::size_t k = 0; k < K; ++k) lap += u[(1 + K + k) * C + p];
        res = -lap - targets[p];
        break;
      }
      case OperatorKind::burgers: {
        const double ux = u[(1 + 0) * C + p];
        const double ut = u[(1 + 1) * C + p];
        const double uxx = u[(1 + K + 0) * C + p];
        res = ut + u[p] * ux - kBurgersViscosity * uxx - targets[p];
        break;
      }
    }
    r[p] = res;
    sum += res * res;
  }
  return sum;
}

void Engine::backward_chunk(std::span<const double> theta, const double* pts, std::size_t C, std::size_t K,
                            std::span<double> grad) {
  const std::size_t nc = 1 + 2 * K;
  const std::size_t L = nc * C;
  const double* th = theta.data();
  double* g = grad.data();

  bar_ = ubar_;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const LayerInfo& li = layers_[l];
    const double* zb = bar_.data();
    if (li.act != Activation::identity) {
      zbar_.resize(li.out * L);
      for (std::size_t i = 0; i < li.out; ++i) {
        kt_->jet_act_backward(li.act, pre_[l].data() + i * L, acts_[l + 1].data() + i * L, bar_.data() + i * L,
                              zbar_.data() + i * L, C, K);
      }
      zb = zbar_.data();
    }
    kt_->gemm_nt(li.out, li.in, L, zb, L, acts_[l].data(), L, g + li.offset, li.in, true);
    double* gb = g + li.offset + li.in * li.out;
    for (std::size_t i = 0; i < li.out; ++i) {
      double s = 0.0;
      for (std::size_t p = 0; p < C; ++p) s += zb[i * L + p];
      gb[i] += s;
    }
    if (l > 0 || kind_ == NetworkKind::bidnn) {
      const double* w = th + li.offset;
      wt_.resize(li.in * li.out);
      for (std::size_t i = 0; i < li.out; ++i) {
        for (std::size_t j = 0; j < li.in; ++j) wt_[j * li.out + i] = w[i * li.in + j];
      }
      bar_prev_.resize(li.in * L);
      kt_->gemm_nn(li.in, L, li.out, wt_.data(), li.out, zb, L, bar_prev_.data(), L, false);
      bar_.swap(bar_prev_);
    }
  }
  if (kind_ != NetworkKind::bidnn) return;

  std::size_t nidx = 0;
  for (std::size_t f = 0; f < blocks_.size(); ++f) {
    const BlockInfo& b = blocks_[f];
    const std::size_t W = b.width;
    if (b.frozen) {
      nidx += W;
      continue;
    }
    const double* w1 = th + b.offset;
    const double* b1 = w1 + W;
    const double* w2 = b1 + W;
    const double* b2 = w2 + W;
    const double* w3 = b2 + W;
    double* gw1 = g + b.offset;
    double* gb1 = gw1 + W;
    double* gw2 = gb1 + W;
    double* gb2 = gw2 + W;
    double* gw3 = gb2 + W;
    const double* ov = bar_.data() + f * L;
    const double* od = K ? ov + (1 + b.dimension) * C : nullptr;
    const double* odd = K ? ov + (1 + K + b.dimension) * C : nullptr;
    double sb3 = 0.0;
    for (std::size_t p = 0; p < C; ++p) sb3 += ov[p];
    gw3[W] += sb3;
    for (std::size_t q = 0; q < W; ++q, ++nidx) {
      const double* z1 = block_z1_.data() + nidx * C;
      const double* y = block_y_.data() + nidx * C;
      const double c = w1[q] * w2[q];
      double s_w1 = 0.0, s_b1 = 0.0, s_w2 = 0.0, s_b2 = 0.0, s_w3 = 0.0;
      for (std::size_t p = 0; p < C; ++p) {
        double s1, s2 = 0.0, s3 = 0.0;
        if (b.act == Activation::tanh) {
          s1 = 1.0 - y[p] * y[p];
          s2 = -2.0 * y[p] * s1;
          s3 = -2.0 * s1 * s1 + 4.0 * y[p] * y[p] * s1;
        } else {
          s1 = z1[p] * w2[q] + b2[q] > 0.0 ? 1.0 : 0.0;
        }
        double gz2 = ov[p] * s1;
        double gc = 0.0;
        double dw3 = ov[p] * y[p];
        if (K) {
          dw3 += od[p] * s1 * c + odd[p] * s2 * c * c;
          gz2 += od[p] * s2 * c + odd[p] * s3 * c * c;
          gc = od[p] * s1 + 2.0 * odd[p] * s2 * c;
        }
        gz2 *= w3[q];
        gc *= w3[q];
        const double x = pts[p * dim_ + b.dimension];
        s_w3 += dw3;
        s_b2 += gz2;
        s_w2 += gz2 * z1[p] + gc * w1[q];
        s_b1 += gz2 * w2[q];
        s_w1 += gz2 * w2[q] * x + gc * w2[q];
      }
      gw1[q] += s_w1;
      gb1[q] += s_b1;
      gw2[q] += s_w2;
      gb2[q] += s_b2;
      gw3[q] += s_w3;
    }
  }
}

double Engine::mean_square(std::span<const double> theta, const ResidualBatch& batch, std::span<double> grad,
                           double scale) {
  check_batch(batch, dim_, relu_);
  if (theta.size() != n_params_) throw DimensionMismatch("engine: parameter vector has wrong length");
  if (!grad.empty() && grad.size() != n_params_) throw DimensionMismatch("engine: gradient vector has wrong length");
  const std::size_t n = batch.targets.size();
  if (n == 0) return 0.0;
  const std::size_t K = directions(batch.op, dim_);
  const double nu = kBurgersViscosity;
  double sum = 0.0;
  for (std::size_t start = 0; start < n; start += chunk_) {
    const std::size_t C = std::min(chunk_, n - start);
    const double* pts = batch.points.data() + start * dim_;
    forward_chunk(theta, pts, C, K);
    resid_.resize(C);
    sum += chunk_residuals(batch.op, batch.targets.data() + start, C, K, resid_.data());
    if (grad.empty()) continue;

    const std::size_t L = (1 + 2 * K) * C;
    ubar_.assign(L, 0.0);
    const double* u = acts_.back().data();
    for (std::size_t p = 0; p < C; ++p) {
      const double gr = scale * 2.0 * resid_[p] / static_cast<double>(n);
      switch (batch.op) {
        case OperatorKind::identity:
          ubar_[p] = gr;
          break;
        case OperatorKind::neg_laplacian:
          for (std::size_t k = 0; k < K; ++k) ubar_[(1 + K + k) * C + p] = -gr;
          break;
        case OperatorKind::burgers:
          ubar_[p] = gr * u[(1 + 0) * C + p];
          ubar_[(1 + 0) * C + p] = gr * u[p];
          ubar_[(1 + 1) * C + p] = gr;
          ubar_[(1 + K + 0) * C + p] = -nu * gr;
          break;
      }
    }
    backward_chunk(theta, pts, C, K, grad);
  }
  return sum / static_cast<double>(n);
}

void Engine::residuals(std::span<const double> theta, const ResidualBatch& batch, std::span<double> out) {
  check_batch(batch, dim_, relu_);
  if (out.size() != batch.targets.size()) throw DimensionMismatch("engine: residual output has wrong length");
  const std::size_t n = batch.targets.size();
  const std::size_t K = directions(batch.op, dim_);
  for (std::size_t start = 0; start < n; start += chunk_) {
    const std::size_t C = std::min(chunk_, n - start);
    forward_chunk(theta, batch.points.data() + start * dim_, C, K);
    chunk_residuals(batch.op, batch.targets.data() + start, C, K, out.data() + start);
  }
}

void Engine::predict(std::span<const double> theta, std::span<const double> points, std::span<double> out) {
  if (points.size() != out.size() * dim_) throw DimensionMismatch("engine: predict output has wrong length");
  const std::size_t n = out.size();
  for (std::size_t start = 0; start < n; start += chunk_) {
    const std::size_t C = std::min(chunk_, n - start);
    forward_chunk(theta, points.data() + start * dim_, C, 0);
    std::copy_n(acts_.back().data(), C, out.data() + start);
  }
}

}  // namespace abidnn
