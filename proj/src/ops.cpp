#include "bsda/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "bsda/error.hpp"

namespace bsda::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

[[noreturn]] void shape_error(const std::string& what) { throw Error(Errc::ShapeMismatch, what); }

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    shape_error(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    shape_error(std::string(op) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                " differ");
  }
}

Graph& graph_of(Var v) {
  if (!v.valid()) shape_error("invalid variable");
  return *v.graph;
}

void accumulate(Graph& g, Var v, std::span<const double> delta) {
  if (!g.requires_grad(v)) return;
  auto dst = g.grad_buffer(v).values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += delta[i];
}

struct ConvGeometry {
  int n, c, h, w;
  int o, k;
  int stride, pad;
  int oh, ow;

  int patch() const { return c * k * k; }
  int out_pixels() const { return oh * ow; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

// Output columns [lo, hi) read inside the input row for kernel offset kj.
std::pair<int, int> valid_columns(const ConvGeometry& g, int kj) {
  int lo = 0;
  while (lo < g.ow && lo * g.stride - g.pad + kj < 0) ++lo;
  int hi = g.ow;
  while (hi > lo && (hi - 1) * g.stride - g.pad + kj >= g.w) --hi;
  return {lo, hi};
}

// Unfolds one sample into the column block starting at `cols`; consecutive
// patch rows are `ld` apart so a whole batch shares one matrix.
void im2col(const double* x, const ConvGeometry& g, double* cols, std::size_t ld) {
  for (int ch = 0; ch < g.c; ++ch) {
    const double* plane = x + static_cast<std::size_t>(ch) * g.h * g.w;
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        double* row = cols + static_cast<std::size_t>((ch * g.k + ki) * g.k + kj) * ld;
        const auto [lo, hi] = valid_columns(g, kj);
        for (int y = 0; y < g.oh; ++y) {
          const int iy = y * g.stride - g.pad + ki;
          double* dst = row + static_cast<std::size_t>(y) * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.ow, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * g.w - g.pad + kj;
          std::fill(dst, dst + lo, 0.0);
          if (g.stride == 1) {
            std::copy(src + lo, src + hi, dst + lo);
          } else {
            for (int xo = lo; xo < hi; ++xo) dst[xo] = src[xo * g.stride];
          }
          std::fill(dst + hi, dst + g.ow, 0.0);
        }
      }
    }
  }
}

void col2im_add(const double* cols, std::size_t ld, const ConvGeometry& g, double* x) {
  for (int ch = 0; ch < g.c; ++ch) {
    double* plane = x + static_cast<std::size_t>(ch) * g.h * g.w;
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const double* row = cols + static_cast<std::size_t>((ch * g.k + ki) * g.k + kj) * ld;
        const auto [lo, hi] = valid_columns(g, kj);
        for (int y = 0; y < g.oh; ++y) {
          const int iy = y * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.h) continue;
          const double* src = row + static_cast<std::size_t>(y) * g.ow;
          double* dst = plane + static_cast<std::size_t>(iy) * g.w - g.pad + kj;
          for (int xo = lo; xo < hi; ++xo) dst[xo * g.stride] += src[xo];
        }
      }
    }
  }
}

// Samples per GEMM: low-resolution layers are batched so the products are not
// tiny, high-resolution ones go one sample at a time to keep columns in cache.
int chunk_samples(const ConvGeometry& g) {
  constexpr int kTargetColumns = 1024;
  return std::clamp(kTargetColumns / std::max(1, g.out_pixels()), 1, g.n);
}

// Columns of samples [n0, n0 + count): (patch, count * out_pixels).
void unfold(const double* x, const ConvGeometry& g, int n0, int count, RowMat& cols) {
  const std::size_t opix = g.out_pixels();
  const std::size_t ld = opix * count;
  const std::size_t in_stride = static_cast<std::size_t>(g.c) * g.h * g.w;
  cols.resize(g.patch(), static_cast<Eigen::Index>(ld));
  for (int i = 0; i < count; ++i) {
    const double* xn = x + (n0 + i) * in_stride;
    if (g.pointwise()) {
      for (int ch = 0; ch < g.c; ++ch) {
        std::copy(xn + ch * opix, xn + (ch + 1) * opix, cols.data() + ch * ld + i * opix);
      }
    } else {
      im2col(xn, g, cols.data() + i * opix, ld);
    }
  }
}

void conv_forward(const Tensor& X, const Tensor& W, const ConvGeometry& g, double* out) {
  const std::size_t opix = g.out_pixels();
  const RowMat wm = ConstMatMap(W.data(), g.o, g.patch());
  const int chunk = chunk_samples(g);
  RowMat cols;
  RowMat y;
  for (int n0 = 0; n0 < g.n; n0 += chunk) {
    const int count = std::min(chunk, g.n - n0);
    const std::size_t ld = opix * count;
    unfold(X.data(), g, n0, count, cols);
    y.noalias() = wm * cols;
    for (int i = 0; i < count; ++i) {
      for (int o = 0; o < g.o; ++o) {
        const double* src = y.data() + o * ld + i * opix;
        std::copy(src, src + opix, out + (static_cast<std::size_t>(n0 + i) * g.o + o) * opix);
      }
    }
  }
}

void conv_backward(const Tensor& X, const Tensor& W, const Tensor& gout, const ConvGeometry& g, double* dx,
                   double* dw) {
  const std::size_t opix = g.out_pixels();
  const std::size_t in_stride = static_cast<std::size_t>(g.c) * g.h * g.w;
  const RowMat wm = ConstMatMap(W.data(), g.o, g.patch());
  RowMat dwm;
  if (dw) dwm.setZero(g.o, g.patch());
  const int chunk = chunk_samples(g);
  RowMat dy;
  RowMat cols;
  RowMat dcols;
  for (int n0 = 0; n0 < g.n; n0 += chunk) {
    const int count = std::min(chunk, g.n - n0);
    const std::size_t ld = opix * count;
    dy.resize(g.o, static_cast<Eigen::Index>(ld));
    for (int i = 0; i < count; ++i) {
      for (int o = 0; o < g.o; ++o) {
        const double* src = gout.data() + (static_cast<std::size_t>(n0 + i) * g.o + o) * opix;
        std::copy(src, src + opix, dy.data() + o * ld + i * opix);
      }
    }
    if (dw) {
      unfold(X.data(), g, n0, count, cols);
      dwm.noalias() += dy * cols.transpose();
    }
    if (dx) {
      dcols.noalias() = wm.transpose() * dy;
      for (int i = 0; i < count; ++i) {
        double* dxn = dx + (n0 + i) * in_stride;
        if (g.pointwise()) {
          for (int ch = 0; ch < g.c; ++ch) {
            const double* src = dcols.data() + ch * ld + i * opix;
            for (std::size_t p = 0; p < opix; ++p) dxn[ch * opix + p] += src[p];
          }
        } else {
          col2im_add(dcols.data() + i * opix, ld, g, dxn);
        }
      }
    }
  }
  if (dw) MatMap(dw, g.o, g.patch()) += dwm;
}

std::size_t nchw(const Tensor& t, int n, int c, int y, int x) {
  return ((static_cast<std::size_t>(n) * t.dim(1) + c) * t.dim(2) + y) * t.dim(3) + x;
}

}  // namespace

Var conv2d(Var x, Var weight, std::optional<Var> bias, Conv2dSpec spec) {
  Graph& graph = graph_of(x);
  const Tensor& X = x.value();
  const Tensor& W = weight.value();
  require_rank(X, 4, "conv2d input");
  require_rank(W, 4, "conv2d weight");
  if (W.dim(1) != X.dim(1)) {
    shape_error("conv2d: weight expects " + std::to_string(W.dim(1)) + " channels, input has " +
                std::to_string(X.dim(1)));
  }
  if (W.dim(2) != W.dim(3)) shape_error("conv2d: kernel must be square");
  if (spec.stride < 1 || spec.padding < 0) shape_error("conv2d: invalid stride or padding");
  ConvGeometry geo{X.dim(0), X.dim(1), X.dim(2), X.dim(3), W.dim(0), W.dim(2), spec.stride,
                   spec.padding, 0, 0};
  const int span_h = geo.h + 2 * geo.pad - geo.k;
  const int span_w = geo.w + 2 * geo.pad - geo.k;
  if (span_h < 0 || span_w < 0) shape_error("conv2d: kernel larger than padded input");
  geo.oh = span_h / geo.stride + 1;
  geo.ow = span_w / geo.stride + 1;
  if (bias) {
    const Tensor& B = bias->value();
    if (B.rank() != 1 || B.dim(0) != geo.o) shape_error("conv2d: bias must have shape (O)");
  }

  Tensor out(Shape{geo.n, geo.o, geo.oh, geo.ow});
  conv_forward(X, W, geo, out.data());
  if (bias) {
    const double* b = bias->value().data();
    const std::size_t opix = geo.out_pixels();
    for (int n = 0; n < geo.n; ++n) {
      for (int o = 0; o < geo.o; ++o) {
        double* row = out.data() + (static_cast<std::size_t>(n) * geo.o + o) * opix;
        for (std::size_t i = 0; i < opix; ++i) row[i] += b[o];
      }
    }
  }

  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  const std::optional<Var> bias_var = bias;
  return graph.record("conv2d", std::move(out), inputs,
                      [x, weight, bias_var, geo](Graph& g, const Tensor& gout) {
    double* dx = g.requires_grad(x) ? g.grad_buffer(x).data() : nullptr;
    double* dw = g.requires_grad(weight) ? g.grad_buffer(weight).data() : nullptr;
    if (bias_var && g.requires_grad(*bias_var)) {
      double* db = g.grad_buffer(*bias_var).data();
      const std::size_t opix = geo.out_pixels();
      for (int n = 0; n < geo.n; ++n) {
        for (int o = 0; o < geo.o; ++o) {
          const double* row = gout.data() + (static_cast<std::size_t>(n) * geo.o + o) * opix;
          double sum = 0.0;
          for (std::size_t i = 0; i < opix; ++i) sum += row[i];
          db[o] += sum;
        }
      }
    }
    if (!dx && !dw) return;
    conv_backward(g.value(x), g.value(weight), gout, geo, dx, dw);
  });
}

Var batchnorm2d(Var x, Var gamma, Var beta, BatchNormStats& stats, Mode mode) {
  Graph& graph = graph_of(x);
  const Tensor& X = x.value();
  require_rank(X, 4, "batchnorm2d");
  const int n = X.dim(0), c = X.dim(1), hw = X.dim(2) * X.dim(3);
  const Shape ch_shape{c};
  if (gamma.shape() != ch_shape || beta.shape() != ch_shape || stats.running_mean.shape() != ch_shape ||
      stats.running_var.shape() != ch_shape) {
    shape_error("batchnorm2d: per-channel tensors must have shape (" + std::to_string(c) + ")");
  }
  if (mode == Mode::Train && n < 2) {
    throw Error(Errc::BatchTooSmall, "batchnorm2d needs a batch of at least 2 in train mode");
  }
  const double m = static_cast<double>(n) * hw;
  std::vector<double> mean(c), invstd(c);
  for (int ch = 0; ch < c; ++ch) {
    if (mode == Mode::Train) {
      double s = 0.0;
      for (int b = 0; b < n; ++b) {
        const double* p = X.data() + nchw(X, b, ch, 0, 0);
        for (int i = 0; i < hw; ++i) s += p[i];
      }
      const double mu = s / m;
      double v = 0.0;
      for (int b = 0; b < n; ++b) {
        const double* p = X.data() + nchw(X, b, ch, 0, 0);
        for (int i = 0; i < hw; ++i) v += (p[i] - mu) * (p[i] - mu);
      }
      v /= m;
      mean[ch] = mu;
      invstd[ch] = 1.0 / std::sqrt(v + stats.eps);
      stats.running_mean[ch] = (1.0 - stats.momentum) * stats.running_mean[ch] + stats.momentum * mu;
      const double unbiased = m > 1.0 ? v * m / (m - 1.0) : v;
      stats.running_var[ch] = (1.0 - stats.momentum) * stats.running_var[ch] + stats.momentum * unbiased;
    } else {
      mean[ch] = stats.running_mean[ch];
      invstd[ch] = 1.0 / std::sqrt(stats.running_var[ch] + stats.eps);
    }
  }

  Tensor xhat(X.shape());
  Tensor out(X.shape());
  const double* gm = gamma.value().data();
  const double* bt = beta.value().data();
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = nchw(X, b, ch, 0, 0);
      for (int i = 0; i < hw; ++i) {
        const double xh = (X[off + i] - mean[ch]) * invstd[ch];
        xhat[off + i] = xh;
        out[off + i] = gm[ch] * xh + bt[ch];
      }
    }
  }

  return graph.record("batchnorm2d", std::move(out), {x, gamma, beta},
                      [x, gamma, beta, mode, n, c, hw, m, xhat = std::move(xhat),
                       invstd = std::move(invstd)](Graph& g, const Tensor& gout) {
    const double* gm = g.value(gamma).data();
    double* dgamma = g.requires_grad(gamma) ? g.grad_buffer(gamma).data() : nullptr;
    double* dbeta = g.requires_grad(beta) ? g.grad_buffer(beta).data() : nullptr;
    double* dx = g.requires_grad(x) ? g.grad_buffer(x).data() : nullptr;
    for (int ch = 0; ch < c; ++ch) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int b = 0; b < n; ++b) {
        const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
        for (int i = 0; i < hw; ++i) {
          sum_dy += gout[off + i];
          sum_dy_xhat += gout[off + i] * xhat[off + i];
        }
      }
      if (dgamma) dgamma[ch] += sum_dy_xhat;
      if (dbeta) dbeta[ch] += sum_dy;
      if (!dx) continue;
      const double k = gm[ch] * invstd[ch];
      for (int b = 0; b < n; ++b) {
        const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
        for (int i = 0; i < hw; ++i) {
          if (mode == Mode::Train) {
            dx[off + i] += k * (gout[off + i] - sum_dy / m - xhat[off + i] * sum_dy_xhat / m);
          } else {
            dx[off + i] += k * gout[off + i];
          }
        }
      }
    }
  });
}

Var relu(Var x) {
  Graph& graph = graph_of(x);
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return graph.record("relu", std::move(out), {x}, [x](Graph& g, const Tensor& gout) {
    const Tensor& X = g.value(x);
    auto dx = g.grad_buffer(x).values();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (X[i] > 0.0) dx[i] += gout[i];
    }
  });
}

Var sigmoid(Var x) {
  Graph& graph = graph_of(x);
  Tensor out = x.value();
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  Tensor saved = out;
  return graph.record("sigmoid", std::move(out), {x},
                      [x, y = std::move(saved)](Graph& g, const Tensor& gout) {
    auto dx = g.grad_buffer(x).values();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gout[i] * y[i] * (1.0 - y[i]);
  });
}

Var softmax(Var x) {
  Graph& graph = graph_of(x);
  const Tensor& X = x.value();
  require_rank(X, 2, "softmax");
  const int n = X.dim(0), k = X.dim(1);
  Tensor out(X.shape());
  for (int r = 0; r < n; ++r) {
    const double* in = X.data() + static_cast<std::size_t>(r) * k;
    double* o = out.data() + static_cast<std::size_t>(r) * k;
    const double mx = *std::max_element(in, in + k);
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += (o[j] = std::exp(in[j] - mx));
    for (int j = 0; j < k; ++j) o[j] /= s;
  }
  Tensor saved = out;
  return graph.record("softmax", std::move(out), {x},
                      [x, n, k, y = std::move(saved)](Graph& g, const Tensor& gout) {
    double* dx = g.grad_buffer(x).data();
    for (int r = 0; r < n; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * k;
      double dot = 0.0;
      for (int j = 0; j < k; ++j) dot += gout[off + j] * y[off + j];
      for (int j = 0; j < k; ++j) dx[off + j] += y[off + j] * (gout[off + j] - dot);
    }
  });
}

Var upsample_nearest2x(Var x) {
  Graph& graph = graph_of(x);
  const Tensor& X = x.value();
  require_rank(X, 4, "upsample_nearest2x");
  const int planes = X.dim(0) * X.dim(1), h = X.dim(2), w = X.dim(3);
  Tensor out(Shape{X.dim(0), X.dim(1), 2 * h, 2 * w});
  for (int p = 0; p < planes; ++p) {
    const double* in = X.data() + static_cast<std::size_t>(p) * h * w;
    double* o = out.data() + static_cast<std::size_t>(p) * 4 * h * w;
    for (int y = 0; y < 2 * h; ++y) {
      for (int xo = 0; xo < 2 * w; ++xo) o[static_cast<std::size_t>(y) * 2 * w + xo] = in[(y / 2) * w + xo / 2];
    }
  }
  return graph.record("upsample_nearest2x", std::move(out), {x},
                      [x, planes, h, w](Graph& g, const Tensor& gout) {
    double* dx = g.grad_buffer(x).data();
    for (int p = 0; p < planes; ++p) {
      const double* go = gout.data() + static_cast<std::size_t>(p) * 4 * h * w;
      double* d = dx + static_cast<std::size_t>(p) * h * w;
      for (int y = 0; y < 2 * h; ++y) {
        for (int xo = 0; xo < 2 * w; ++xo) d[(y / 2) * w + xo / 2] += go[static_cast<std::size_t>(y) * 2 * w + xo];
      }
    }
  });
}

Var maxpool2x(Var x) {
  Graph& graph = graph_of(x);
  const Tensor& X = x.value();
  require_rank(X, 4, "maxpool2x");
  const int planes = X.dim(0) * X.dim(1), h = X.dim(2), w = X.dim(3);
  if (h % 2 != 0 || w % 2 != 0) shape_error("maxpool2x: spatial dims must be even, got " + to_string(X.shape()));
  const int oh = h / 2, ow = w / 2;
  Tensor out(Shape{X.dim(0), X.dim(1), oh, ow});
  std::vector<std::uint32_t> argmax(out.size());
  for (int p = 0; p < planes; ++p) {
    const std::size_t in_off = static_cast<std::size_t>(p) * h * w;
    const std::size_t out_off = static_cast<std::size_t>(p) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int xo = 0; xo < ow; ++xo) {
        std::size_t best = in_off + static_cast<std::size_t>(2 * y) * w + 2 * xo;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = in_off + static_cast<std::size_t>(2 * y + dy) * w + 2 * xo + dx;
            if (X[idx] > X[best]) best = idx;
          }
        }
        out[out_off + static_cast<std::size_t>(y) * ow + xo] = X[best];
        argmax[out_off + static_cast<std::size_t>(y) * ow + xo] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return graph.record("maxpool2x", std::move(out), {x},
                      [x, argmax = std::move(argmax)](Graph& g, const Tensor& gout) {
    double* dx = g.grad_buffer(x).data();
    for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += gout[i];
  });
}

Var concat(std::initializer_list<Var> xs) { return concat(std::span<const Var>(xs.begin(), xs.size())); }

Var concat(std::span<const Var> xs) {
  if (xs.empty()) shape_error("concat of no tensors");
  Graph& graph = graph_of(xs.front());
  const Tensor& first = xs.front().value();
  require_rank(first, 4, "concat");
  const int n = first.dim(0), h = first.dim(2), w = first.dim(3);
  std::vector<int> channels;
  int total = 0;
  for (const Var& v : xs) {
    if (v.graph != &graph) shape_error("concat: inputs from different graphs");
    const Tensor& t = v.value();
    require_rank(t, 4, "concat");
    if (t.dim(0) != n || t.dim(2) != h || t.dim(3) != w) {
      shape_error("concat: " + to_string(t.shape()) + " incompatible with " + to_string(first.shape()));
    }
    channels.push_back(t.dim(1));
    total += t.dim(1);
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out(Shape{n, total, h, w});
  for (int b = 0; b < n; ++b) {
    std::size_t c0 = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const Tensor& t = xs[i].value();
      const std::size_t len = channels[i] * plane;
      std::copy_n(t.data() + b * len, len, out.data() + (static_cast<std::size_t>(b) * total + c0) * plane);
      c0 += channels[i];
    }
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  return graph.record("concat", std::move(out), xs,
                      [inputs, channels, n, total, plane](Graph& g, const Tensor& gout) {
    for (int b = 0; b < n; ++b) {
      std::size_t c0 = 0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const std::size_t len = channels[i] * plane;
        if (g.requires_grad(inputs[i])) {
          double* d = g.grad_buffer(inputs[i]).data() + b * len;
          const double* src = gout.data() + (static_cast<std::size_t>(b) * total + c0) * plane;
          for (std::size_t k = 0; k < len; ++k) d[k] += src[k];
        }
        c0 += channels[i];
      }
    }
  });
}

Var global_avg_pool(Var x) {
  Graph& graph = graph_of(x);
  const Tensor& X = x.value();
  require_rank(X, 4, "global_avg_pool");
  const int n = X.dim(0), c = X.dim(1), hw = X.dim(2) * X.dim(3);
  Tensor out(Shape{n, c});
  for (int p = 0; p < n * c; ++p) {
    double s = 0.0;
    const double* in = X.data() + static_cast<std::size_t>(p) * hw;
    for (int i = 0; i < hw; ++i) s += in[i];
    out[p] = s / hw;
  }
  return graph.record("global_avg_pool", std::move(out), {x},
                      [x, n, c, hw](Graph& g, const Tensor& gout) {
    double* dx = g.grad_buffer(x).data();
    for (int p = 0; p < n * c; ++p) {
      const double v = gout[p] / hw;
      double* d = dx + static_cast<std::size_t>(p) * hw;
      for (int i = 0; i < hw; ++i) d[i] += v;
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  Graph& graph = graph_of(x);
  const Tensor& X = x.value();
  const Tensor& W = weight.value();
  require_rank(X, 2, "linear input");
  require_rank(W, 2, "linear weight");
  const int n = X.dim(0), in = X.dim(1), o = W.dim(0);
  if (W.dim(1) != in) shape_error("linear: weight " + to_string(W.shape()) + " vs input " + to_string(X.shape()));
  if (bias.shape() != Shape{o}) shape_error("linear: bias must have shape (O)");
  Tensor out(Shape{n, o});
  MatMap y(out.data(), n, o);
  y.noalias() = ConstMatMap(X.data(), n, in) * ConstMatMap(W.data(), o, in).transpose();
  const double* b = bias.value().data();
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < o; ++j) y(r, j) += b[j];
  }
  return graph.record("linear", std::move(out), {x, weight, bias},
                      [x, weight, bias, n, in, o](Graph& g, const Tensor& gout) {
    const ConstMatMap dy(gout.data(), n, o);
    if (g.requires_grad(x)) {
      MatMap(g.grad_buffer(x).data(), n, in).noalias() += dy * ConstMatMap(g.value(weight).data(), o, in);
    }
    if (g.requires_grad(weight)) {
      MatMap(g.grad_buffer(weight).data(), o, in).noalias() +=
          dy.transpose() * ConstMatMap(g.value(x).data(), n, in);
    }
    if (g.requires_grad(bias)) {
      double* db = g.grad_buffer(bias).data();
      for (int r = 0; r < n; ++r) {
        for (int j = 0; j < o; ++j) db[j] += dy(r, j);
      }
    }
  });
}

Var add(Var a, Var b) {
  Graph& graph = graph_of(a);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const auto bv = b.value().values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
  return graph.record("add", std::move(out), {a, b}, [a, b](Graph& g, const Tensor& gout) {
    accumulate(g, a, gout.values());
    accumulate(g, b, gout.values());
  });
}

Var scale(Var x, double factor) {
  Graph& graph = graph_of(x);
  Tensor out = x.value();
  for (double& v : out.values()) v *= factor;
  return graph.record("scale", std::move(out), {x}, [x, factor](Graph& g, const Tensor& gout) {
    auto dx = g.grad_buffer(x).values();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += factor * gout[i];
  });
}

Var weighted_sum(Var x, const Tensor& weights) {
  Graph& graph = graph_of(x);
  require_same_shape(x.value(), weights, "weighted_sum");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += x.value()[i] * weights[i];
  return graph.record("weighted_sum", Tensor(Shape{}, s), {x}, [x, weights](Graph& g, const Tensor& gout) {
    auto dx = g.grad_buffer(x).values();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gout[0] * weights[i];
  });
}

Var dice_loss(Var logits, const Tensor& target, double eps) {
  Graph& graph = graph_of(logits);
  const Tensor& Z = logits.value();
  require_same_shape(Z, target, "dice_loss");
  if (Z.rank() < 1 || Z.dim(0) < 1) shape_error("dice_loss: needs a batch axis");
  const int n = Z.dim(0);
  const std::size_t per = Z.size() / static_cast<std::size_t>(n);
  Tensor prob(Z.shape());
  std::vector<double> inter(n, 0.0), denom(n, 0.0);
  double loss = 0.0;
  for (int b = 0; b < n; ++b) {
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-Z[i]));
      prob[i] = p;
      inter[b] += p * target[i];
      denom[b] += p + target[i];
    }
    loss += 1.0 - (2.0 * inter[b] + eps) / (denom[b] + eps);
  }
  loss /= n;
  return graph.record("dice_loss", Tensor(Shape{}, loss), {logits},
                      [logits, target, eps, n, per, prob = std::move(prob), inter = std::move(inter),
                       denom = std::move(denom)](Graph& g, const Tensor& gout) {
    double* dz = g.grad_buffer(logits).data();
    for (int b = 0; b < n; ++b) {
      const double num = 2.0 * inter[b] + eps;
      const double den = denom[b] + eps;
      for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
        const double dl_dp = -(2.0 * target[i] * den - num) / (den * den);
        dz[i] += gout[0] / n * dl_dp * prob[i] * (1.0 - prob[i]);
      }
    }
  });
}

Var mse_loss(Var pred, const Tensor& target) {
  Graph& graph = graph_of(pred);
  require_same_shape(pred.value(), target, "mse_loss");
  const Tensor& P = pred.value();
  const double count = static_cast<double>(P.size());
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) s += (P[i] - target[i]) * (P[i] - target[i]);
  return graph.record("mse_loss", Tensor(Shape{}, s / count), {pred},
                      [pred, target, count](Graph& g, const Tensor& gout) {
    const Tensor& P = g.value(pred);
    auto dp = g.grad_buffer(pred).values();
    for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += gout[0] * 2.0 * (P[i] - target[i]) / count;
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  Graph& graph = graph_of(logits);
  const Tensor& Z = logits.value();
  require_rank(Z, 2, "cross_entropy");
  const int n = Z.dim(0), k = Z.dim(1);
  if (static_cast<std::size_t>(n) != labels.size()) shape_error("cross_entropy: one label per row required");
  Tensor prob(Z.shape());
  double loss = 0.0;
  for (int r = 0; r < n; ++r) {
    if (labels[r] < 0 || labels[r] >= k) {
      throw Error(Errc::LabelOutOfRange, "label " + std::to_string(labels[r]) + " outside [0, " +
                                             std::to_string(k) + ")");
    }
    const double* z = Z.data() + static_cast<std::size_t>(r) * k;
    double* p = prob.data() + static_cast<std::size_t>(r) * k;
    const double mx = *std::max_element(z, z + k);
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += (p[j] = std::exp(z[j] - mx));
    for (int j = 0; j < k; ++j) p[j] /= s;
    loss += std::log(s) + mx - z[labels[r]];
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return graph.record("cross_entropy", Tensor(Shape{}, loss / n), {logits},
                      [logits, n, k, lab = std::move(lab), prob = std::move(prob)](Graph& g, const Tensor& gout) {
    double* dz = g.grad_buffer(logits).data();
    for (int r = 0; r < n; ++r) {
      for (int j = 0; j < k; ++j) {
        const double onehot = j == lab[r] ? 1.0 : 0.0;
        dz[static_cast<std::size_t>(r) * k + j] += gout[0] / n * (prob[static_cast<std::size_t>(r) * k + j] - onehot);
      }
    }
  });
}

}  // namespace bsda::ad
