// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#include "coughsense/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "coughsense/error.hpp"

namespace coughsense::nn {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void accumulate(Node& parent, const Tensor& g) {
  if (!parent.requires_grad) return;
  Tensor& dst = parent.grad_buffer();
  double* d = dst.data();
  const double* s = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

// grad buffer of a parent, or nullptr when it takes no gradient
double* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? p.grad_buffer().data() : nullptr;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank(const Var& x, std::size_t rank, const char* op) {
  if (x.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(x.shape()));
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  }, "add");
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    if (double* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] -= self.grad[i];
    }
  }, "sub");
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (double* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * bv[i];
    }
    if (double* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += self.grad[i] * av[i];
    }
  }, "mul");
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= s;
  return make_result(std::move(out), {a}, [s](Node& self) {
    if (double* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += s * self.grad[i];
    }
  }, "scale");
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  return make_result(Tensor::scalar(acc), {a}, [](Node& self) {
    const double g = self.grad[0];
    if (double* ga = grad_of(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g;
    }
  }, "sum");
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var relu(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return make_result(std::move(out), {x}, [](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    if (double* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < xv.size(); ++i) {
        if (xv[i] > 0.0) gx[i] += self.grad[i];
      }
    }
  }, "relu");
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {x}, [](Node& self) {
    if (double* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
    }
  }, "reshape");
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor out({m, n});
  MapR(out.data(), m, n).noalias() = CMapR(a.value().data(), m, k) * CMapR(b.value().data(), k, n);
  return make_result(std::move(out), {a, b}, [m, k, n](Node& self) {
    CMapR g(self.grad.data(), m, n);
    if (double* ga = grad_of(self, 0)) {
      MapR(ga, m, k).noalias() += g * CMapR(self.parents[1]->value.data(), k, n).transpose();
    }
    if (double* gb = grad_of(self, 1)) {
      MapR(gb, k, n).noalias() += CMapR(self.parents[0]->value.data(), m, k).transpose() * g;
    }
  }, "matmul");
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor out({n, m});
  MapR(out.data(), n, m) = CMapR(a.value().data(), m, n).transpose();
  return make_result(std::move(out), {a}, [m, n](Node& self) {
    if (double* ga = grad_of(self, 0)) {
      MapR(ga, m, n) += CMapR(self.grad.data(), n, m).transpose();
    }
  }, "transpose");
}

Var softmax(const Var& x) {
  const std::size_t len = x.shape().back();
  const std::size_t rows = x.value().size() / len;
  Tensor out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * len;
    const double mx = *std::max_element(row, row + len);
    double z = 0.0;
    for (std::size_t i = 0; i < len; ++i) z += (row[i] = std::exp(row[i] - mx));
    for (std::size_t i = 0; i < len; ++i) row[i] /= z;
  }
  return make_result(std::move(out), {x}, [rows, len](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * len;
      const double* g = self.grad.data() + r * len;
      double dot = 0.0;
      for (std::size_t i = 0; i < len; ++i) dot += g[i] * y[i];
      for (std::size_t i = 0; i < len; ++i) gx[r * len + i] += y[i] * (g[i] - dot);
    }
  }, "softmax");
}

Var cross_entropy(const Var& logits, std::size_t target) {
  const Tensor& z = logits.value();
  if (target >= z.size()) throw ShapeError("cross_entropy: target index out of range");
  const double mx = *std::max_element(z.values().begin(), z.values().end());
  double total = 0.0;
  for (double v : z.values()) total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  return make_result(Tensor::scalar(lse - z[target]), {logits}, [target, lse](Node& self) {
    double* gz = grad_of(self, 0);
    if (!gz) return;
    const Tensor& zv = self.parents[0]->value;
    const double g = self.grad[0];
    for (std::size_t i = 0; i < zv.size(); ++i) {
      gz[i] += g * (std::exp(zv[i] - lse) - (i == target ? 1.0 : 0.0));
    }
  }, "cross_entropy");
}

Var bce_with_logits(const Var& logits, const Tensor& targets) {
  const Tensor& z = logits.value();
  if (targets.size() != z.size()) throw ShapeError("bce_with_logits: target count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    total += std::max(z[i], 0.0) - z[i] * targets[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  const double n = static_cast<double>(z.size());
  return make_result(Tensor::scalar(total / n), {logits}, [targets, n](Node& self) {
    double* gz = grad_of(self, 0);
    if (!gz) return;
    const Tensor& zv = self.parents[0]->value;
    const double g = self.grad[0];
    for (std::size_t i = 0; i < zv.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-zv[i]));
      gz[i] += g * (p - targets[i]) / n;
    }
  }, "bce_with_logits");
}

namespace {

struct ConvGeom {
  std::size_t n, ci, h, w, co, kh, kw, ph, pw;
  std::size_t k() const { return ci * kh * kw; }
  std::size_t hw() const { return h * w; }
};

void im2col(const double* x, const ConvGeom& g, double* col) {
  const std::size_t hw = g.hw();
  for (std::size_t c = 0; c < g.ci; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = col + ((c * g.kh + i) * g.kw + j) * hw;
        for (std::size_t y = 0; y < g.h; ++y) {
          const auto yy = static_cast<std::ptrdiff_t>(y + i) - static_cast<std::ptrdiff_t>(g.ph);
          double* dst = row + y * g.w;
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.w, 0.0);
            continue;
          }
          const double* src = x + (c * g.h + static_cast<std::size_t>(yy)) * g.w;
          for (std::size_t xo = 0; xo < g.w; ++xo) {
            const auto xx = static_cast<std::ptrdiff_t>(xo + j) - static_cast<std::ptrdiff_t>(g.pw);
            dst[xo] = (xx < 0 || xx >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0
                                                                          : src[static_cast<std::size_t>(xx)];
          }
        }
      }
    }
  }
}

void col2im(const double* col, const ConvGeom& g, double* dx) {
  const std::size_t hw = g.hw();
  for (std::size_t c = 0; c < g.ci; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = col + ((c * g.kh + i) * g.kw + j) * hw;
        for (std::size_t y = 0; y < g.h; ++y) {
          const auto yy = static_cast<std::ptrdiff_t>(y + i) - static_cast<std::ptrdiff_t>(g.ph);
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          double* dst = dx + (c * g.h + static_cast<std::size_t>(yy)) * g.w;
          const double* src = row + y * g.w;
          for (std::size_t xo = 0; xo < g.w; ++xo) {
            const auto xx = static_cast<std::ptrdiff_t>(xo + j) - static_cast<std::ptrdiff_t>(g.pw);
            if (xx >= 0 && xx < static_cast<std::ptrdiff_t>(g.w)) dst[xx] += src[xo];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b) {
  require_rank(x, 4, "conv2d");
  require_rank(w, 4, "conv2d");
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (ws[1] != xs[1]) {
    throw ShapeError("conv2d: input has " + std::to_string(xs[1]) + " channels, kernel expects " +
                     std::to_string(ws[1]));
  }
  if (ws[2] % 2 == 0 || ws[3] % 2 == 0) throw ShapeError("conv2d: kernel sizes must be odd");
  if (b.value().size() != ws[0]) throw ShapeError("conv2d: bias size must equal output channels");
  const ConvGeom g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], ws[3], ws[2] / 2, ws[3] / 2};

  Tensor out({g.n, g.co, g.h, g.w});
  std::vector<double> col(g.k() * g.hw());
  CMapR wm(w.value().data(), g.co, g.k());
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(x.value().data() + n * g.ci * g.hw(), g, col.data());
    MapR o(out.data() + n * g.co * g.hw(), g.co, g.hw());
    o.noalias() = wm * CMapR(col.data(), g.k(), g.hw());
    for (std::size_t c = 0; c < g.co; ++c) o.row(c).array() += b.value()[c];
  }

  return make_result(std::move(out), {x, w, b}, [g](Node& self) {
    double* gx = grad_of(self, 0);
    double* gw = grad_of(self, 1);
    double* gb = grad_of(self, 2);
    const Tensor& xv = self.parents[0]->value;
    CMapR wm(self.parents[1]->value.data(), g.co, g.k());
    std::vector<double> col(g.k() * g.hw());
    std::vector<double> dcol(gx ? g.k() * g.hw() : 0);
    for (std::size_t n = 0; n < g.n; ++n) {
      CMapR dout(self.grad.data() + n * g.co * g.hw(), g.co, g.hw());
      if (gw) {
        im2col(xv.data() + n * g.ci * g.hw(), g, col.data());
        MapR(gw, g.co, g.k()).noalias() += dout * CMapR(col.data(), g.k(), g.hw()).transpose();
      }
      if (gb) {
        for (std::size_t c = 0; c < g.co; ++c) gb[c] += dout.row(c).sum();
      }
      if (gx) {
        MapR(dcol.data(), g.k(), g.hw()).noalias() = wm.transpose() * dout;
        col2im(dcol.data(), g, gx + n * g.ci * g.hw());
      }
    }
  }, "conv2d");
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats,
               bool training, double momentum, double eps) {
  const Shape& xs = x.shape();
  if (xs.size() != 2 && xs.size() != 4) throw ShapeError("batch_norm: expected [N,C] or [N,C,H,W]");
  const std::size_t n = xs[0], c = xs[1];
  const std::size_t inner = xs.size() == 4 ? xs[2] * xs[3] : 1;
  if (gamma.value().size() != c || beta.value().size() != c) {
    throw ShapeError("batch_norm: scale/shift size must equal channel count");
  }
  if (stats.running_mean.size() != c) {
    stats.running_mean = Tensor({c}, 0.0);
    stats.running_var = Tensor({c}, 1.0);
  }
  const double count = static_cast<double>(n * inner);

  std::vector<double> mu(c), invstd(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (training) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.value().data() + (i * c + ch) * inner;
        for (std::size_t k = 0; k < inner; ++k) s += p[k];
      }
      const double m = s / count;
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.value().data() + (i * c + ch) * inner;
        for (std::size_t k = 0; k < inner; ++k) v += (p[k] - m) * (p[k] - m);
      }
      v /= count;
      mu[ch] = m;
      invstd[ch] = 1.0 / std::sqrt(v + eps);
      const double unbiased = count > 1.0 ? v * count / (count - 1.0) : v;
      stats.running_mean[ch] = momentum * stats.running_mean[ch] + (1.0 - momentum) * m;
      stats.running_var[ch] = momentum * stats.running_var[ch] + (1.0 - momentum) * unbiased;
    } else {
      mu[ch] = stats.running_mean[ch];
      invstd[ch] = 1.0 / std::sqrt(stats.running_var[ch] + eps);
    }
  }

  Tensor xhat(xs);
  Tensor out(xs);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (i * c + ch) * inner;
      for (std::size_t k = 0; k < inner; ++k) {
        const double h = (x.value()[base + k] - mu[ch]) * invstd[ch];
        xhat[base + k] = h;
        out[base + k] = gamma.value()[ch] * h + beta.value()[ch];
      }
    }
  }

  return make_result(std::move(out), {x, gamma, beta},
                     [xhat = std::move(xhat), invstd = std::move(invstd), n, c, inner, count,
                      training](Node& self) {
    double* gx = grad_of(self, 0);
    double* gg = grad_of(self, 1);
    double* gbeta = grad_of(self, 2);
    const Tensor& gam = self.parents[1]->value;
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum_g = 0.0, sum_gh = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t base = (i * c + ch) * inner;
        for (std::size_t k = 0; k < inner; ++k) {
          sum_g += self.grad[base + k];
          sum_gh += self.grad[base + k] * xhat[base + k];
        }
      }
      if (gg) gg[ch] += sum_gh;
      if (gbeta) gbeta[ch] += sum_g;
      if (!gx) continue;
      const double scale_ch = gam[ch] * invstd[ch];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t base = (i * c + ch) * inner;
        for (std::size_t k = 0; k < inner; ++k) {
          if (training) {
            gx[base + k] += scale_ch * (self.grad[base + k] - sum_g / count -
                                        xhat[base + k] * sum_gh / count);
          } else {
            gx[base + k] += scale_ch * self.grad[base + k];
          }
        }
      }
    }
  }, "batch_norm");
}

Var maxpool2d(const Var& x, std::size_t kh, std::size_t kw) {
  require_rank(x, 4, "maxpool2d");
  if (kh == 0 || kw == 0) throw ShapeError("maxpool2d: window must be positive");
  const Shape& xs = x.shape();
  const std::size_t planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  const std::size_t oh = (h + kh - 1) / kh, ow = (w + kw - 1) / kw;
  Tensor out({xs[0], xs[1], oh, ow});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.value().data() + p * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;
        for (std::size_t y = oy * kh; y < std::min(h, oy * kh + kh); ++y) {
          for (std::size_t xx = ox * kw; xx < std::min(w, ox * kw + kw); ++xx) {
            const double v = src[y * w + xx];
            if (v > best) {
              best = v;
              best_i = y * w + xx;
            }
          }
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        out[o] = best;
        (*argmax)[o] = p * h * w + best_i;
      }
    }
  }
  return make_result(std::move(out), {x}, [argmax](Node& self) {
    if (double* gx = grad_of(self, 0)) {
      for (std::size_t o = 0; o < argmax->size(); ++o) gx[(*argmax)[o]] += self.grad[o];
    }
  }, "maxpool2d");
}

Var upsample_nearest(const Var& x, std::size_t fh, std::size_t fw) {
  require_rank(x, 4, "upsample_nearest");
  if (fh < 1 || fw < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  const Shape& xs = x.shape();
  const std::size_t planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  const std::size_t oh = h * fh, ow = w * fw;
  Tensor out({xs[0], xs[1], oh, ow});
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xx = 0; xx < ow; ++xx) {
        out[(p * oh + y) * ow + xx] = x.value()[(p * h + y / fh) * w + xx / fw];
      }
    }
  }
  return make_result(std::move(out), {x}, [planes, h, w, fh, fw](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const std::size_t oh = h * fh, ow = w * fw;
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t xx = 0; xx < ow; ++xx) {
          gx[(p * h + y / fh) * w + xx / fw] += self.grad[(p * oh + y) * ow + xx];
        }
      }
    }
  }, "upsample_nearest");
}

Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: nothing to concatenate");
  const Shape& s0 = xs[0].shape();
  if (s0.size() != 4) throw ShapeError("concat_channels: expected [N,C,H,W]");
  std::size_t total_c = 0;
  std::vector<std::size_t> channels;
  for (const Var& v : xs) {
    const Shape& s = v.shape();
    if (s.size() != 4 || s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3]) {
      throw ShapeError("concat_channels: incompatible shape " + shape_string(s) + " vs " +
                       shape_string(s0));
    }
    channels.push_back(s[1]);
    total_c += s[1];
  }
  const std::size_t n = s0[0], inner = s0[2] * s0[3];
  Tensor out({n, total_c, s0[2], s0[3]});
  std::size_t offset = 0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* src = xs[j].value().data() + i * channels[j] * inner;
      std::copy(src, src + channels[j] * inner, out.data() + (i * total_c + offset) * inner);
    }
    offset += channels[j];
  }
  return make_result(std::move(out), xs, [channels, n, inner, total_c](Node& self) {
    std::size_t offset = 0;
    for (std::size_t j = 0; j < channels.size(); ++j) {
      if (double* g = grad_of(self, j)) {
        for (std::size_t i = 0; i < n; ++i) {
          const double* src = self.grad.data() + (i * total_c + offset) * inner;
          double* dst = g + i * channels[j] * inner;
          for (std::size_t k = 0; k < channels[j] * inner; ++k) dst[k] += src[k];
        }
      }
      offset += channels[j];
    }
  }, "concat_channels");
}

Var mean_axis(const Var& x, std::size_t axis) {
  const Shape& xs = x.shape();
  if (axis >= xs.size()) throw ShapeError("mean_axis: axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xs[i];
  for (std::size_t i = axis + 1; i < xs.size(); ++i) inner *= xs[i];
  const std::size_t len = xs[axis];
  Shape os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i != axis) os.push_back(xs[i]);
  }
  if (os.empty()) os.push_back(1);
  Tensor out(os, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t l = 0; l < len; ++l) {
      const double* src = x.value().data() + (o * len + l) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  for (double& v : out.values()) v /= static_cast<double>(len);
  return make_result(std::move(out), {x}, [outer, inner, len](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const double inv = 1.0 / static_cast<double>(len);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t l = 0; l < len; ++l) {
        double* dst = gx + (o * len + l) * inner;
        const double* src = self.grad.data() + o * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i] * inv;
      }
    }
  }, "mean_axis");
}

Var select(const Var& x, std::size_t index) {
  const Shape& xs = x.shape();
  if (xs.empty() || index >= xs[0]) throw ShapeError("select: index out of range");
  Shape os(xs.begin() + 1, xs.end());
  if (os.empty()) os.push_back(1);
  const std::size_t inner = shape_size(os);
  std::vector<double> data(x.value().data() + index * inner, x.value().data() + (index + 1) * inner);
  return make_result(Tensor(os, std::move(data)), {x}, [index, inner](Node& self) {
    if (double* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < inner; ++i) gx[index * inner + i] += self.grad[i];
    }
  }, "select");
}

Var stack(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("stack: nothing to stack");
  const Shape& s0 = xs[0].shape();
  const std::size_t inner = shape_size(s0);
  Shape os{xs.size()};
  os.insert(os.end(), s0.begin(), s0.end());
  std::vector<double> data;
  data.reserve(inner * xs.size());
  for (const Var& v : xs) {
    if (v.shape() != s0) throw ShapeError("stack: shapes differ");
    data.insert(data.end(), v.value().values().begin(), v.value().values().end());
  }
  return make_result(Tensor(os, std::move(data)), xs, [inner](Node& self) {
    for (std::size_t j = 0; j < self.parents.size(); ++j) {
      if (double* g = grad_of(self, j)) {
        for (std::size_t i = 0; i < inner; ++i) g[i] += self.grad[j * inner + i];
      }
    }
  }, "stack");
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const std::size_t n = x.shape()[0], in = x.shape()[1], out_dim = w.shape()[0];
  if (w.shape()[1] != in) throw ShapeError("linear: input width does not match weight");
  if (b.value().size() != out_dim) throw ShapeError("linear: bias size mismatch");
  Tensor out({n, out_dim});
  MapR o(out.data(), n, out_dim);
  o.noalias() = CMapR(x.value().data(), n, in) * CMapR(w.value().data(), out_dim, in).transpose();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < out_dim; ++j) o(i, j) += b.value()[j];
  }
  return make_result(std::move(out), {x, w, b}, [n, in, out_dim](Node& self) {
    CMapR g(self.grad.data(), n, out_dim);
    if (double* gx = grad_of(self, 0)) {
      MapR(gx, n, in).noalias() += g * CMapR(self.parents[1]->value.data(), out_dim, in);
    }
    if (double* gw = grad_of(self, 1)) {
      MapR(gw, out_dim, in).noalias() += g.transpose() * CMapR(self.parents[0]->value.data(), n, in);
    }
    if (double* gb = grad_of(self, 2)) {
      for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g.col(j).sum();
    }
  }, "linear");
}

Var normalize_columns(const Var& x, double target_norm) {
  require_rank(x, 2, "normalize_columns");
  constexpr double kEps = 1e-12;
  const std::size_t d = x.shape()[0], t = x.shape()[1];
  std::vector<double> norms(t, 0.0);
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < t; ++j) norms[j] += xv[i * t + j] * xv[i * t + j];
  }
  for (double& v : norms) v = std::sqrt(v + kEps);
  Tensor out({d, t});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < t; ++j) out[i * t + j] = target_norm * xv[i * t + j] / norms[j];
  }
  return make_result(std::move(out), {x}, [norms = std::move(norms), d, t, target_norm](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const Tensor& xv = self.parents[0]->value;
    for (std::size_t j = 0; j < t; ++j) {
      double dot = 0.0;  // u . du with u = x / norm
      for (std::size_t i = 0; i < d; ++i) dot += xv[i * t + j] / norms[j] * self.grad[i * t + j];
      for (std::size_t i = 0; i < d; ++i) {
        const double u = xv[i * t + j] / norms[j];
        gx[i * t + j] += target_norm * (self.grad[i * t + j] - u * dot) / norms[j];
      }
    }
  }, "normalize_columns");
}

}  // namespace coughsense::nn
