#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "sgl0/autodiff.hpp"
#include "sgl0/error.hpp"

namespace sgl0 {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

ConstMatMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw UsageError("operands recorded on different tapes");
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw DimensionError(std::string(what) + ": expected shape " + shape_string(expected) + ", got " +
                         shape_string(t.shape()));
  }
}

/// Geometry of a valid, square-kernel convolution.
struct ConvGeometry {
  std::size_t batch, channels, height, width;
  std::size_t filters, kh, kw, stride;
  std::size_t out_h, out_w;

  std::size_t patch() const { return channels * kh * kw; }
  std::size_t out_plane() const { return out_h * out_w; }
  std::size_t columns() const { return batch * out_plane(); }
};

// cols[(c*kh + i)*kw + j, b*P + oy*out_w + ox] = x[b, c, oy*s + i, ox*s + j]
void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const std::size_t ncols = g.columns();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = cols + ((c * g.kh + i) * g.kw + j) * ncols;
        for (std::size_t b = 0; b < g.batch; ++b) {
          const double* plane = x + (b * g.channels + c) * g.height * g.width;
          double* out = row + b * g.out_plane();
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const double* src = plane + (oy * g.stride + i) * g.width + j;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) out[oy * g.out_w + ox] = src[ox * g.stride];
          }
        }
      }
    }
  }
}

void col2im_accumulate(const double* cols, const ConvGeometry& g, double* x_grad) {
  const std::size_t ncols = g.columns();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = cols + ((c * g.kh + i) * g.kw + j) * ncols;
        for (std::size_t b = 0; b < g.batch; ++b) {
          double* plane = x_grad + (b * g.channels + c) * g.height * g.width;
          const double* in = row + b * g.out_plane();
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            double* dst = plane + (oy * g.stride + i) * g.width + j;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) dst[ox * g.stride] += in[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var affine(Var x, Var weight, Var bias) {
  require_same_tape(x, weight);
  require_same_tape(x, bias);
  Tape& tape = x.tape();
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  if (wv.rank() != 2) throw DimensionError("affine: weight must be [O x I], got " + shape_string(wv.shape()));
  if (xv.rank() < 2) throw DimensionError("affine: input must be [B x ...], got " + shape_string(xv.shape()));
  const std::size_t batch = xv.dim(0);
  const std::size_t in = xv.size() / batch;
  const std::size_t out = wv.dim(0);
  if (wv.dim(1) != in) {
    throw DimensionError("affine: input has " + std::to_string(in) + " features per sample, weight " +
                         shape_string(wv.shape()) + " expects " + std::to_string(wv.dim(1)));
  }
  require_shape(bv, {out}, "affine bias");

  Tensor result({batch, out});
  auto y = as_matrix(result, batch, out);
  y.noalias() = as_matrix(xv, batch, in) * as_matrix(wv, out, in).transpose();
  y.rowwise() += ConstVecMap(bv.data(), static_cast<Eigen::Index>(out)).transpose();

  return tape.record(OpKind::affine, {x, weight, bias}, std::move(result),
                     [batch, in, out](const Tensor& g, std::span<const Tensor* const> inputs,
                                      std::span<Tensor* const> grads) {
                       const auto gy = as_matrix(g, batch, out);
                       if (grads[0]) {
                         as_matrix(*grads[0], batch, in).noalias() += gy * as_matrix(*inputs[1], out, in);
                       }
                       if (grads[1]) {
                         as_matrix(*grads[1], out, in).noalias() += gy.transpose() * as_matrix(*inputs[0], batch, in);
                       }
                       if (grads[2]) {
                         VecMap(grads[2]->data(), static_cast<Eigen::Index>(out)) += gy.colwise().sum().transpose();
                       }
                     });
}

Var conv2d(Var x, Var kernels, Var bias, std::size_t stride) {
  require_same_tape(x, kernels);
  require_same_tape(x, bias);
  Tape& tape = x.tape();
  const Tensor& xv = x.value();
  const Tensor& kv = kernels.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 4) throw DimensionError("conv2d: input must be [B x C x H x W], got " + shape_string(xv.shape()));
  if (kv.rank() != 4) throw DimensionError("conv2d: kernels must be [F x C x k x k], got " + shape_string(kv.shape()));
  if (stride == 0) throw ConfigError("conv2d stride must be positive", "stride");

  ConvGeometry geo{};
  geo.batch = xv.dim(0);
  geo.channels = xv.dim(1);
  geo.height = xv.dim(2);
  geo.width = xv.dim(3);
  geo.filters = kv.dim(0);
  geo.kh = kv.dim(2);
  geo.kw = kv.dim(3);
  geo.stride = stride;
  if (kv.dim(1) != geo.channels) {
    throw DimensionError("conv2d: input has " + std::to_string(geo.channels) + " channels, kernels " +
                         shape_string(kv.shape()) + " expect " + std::to_string(kv.dim(1)));
  }
  if (geo.height < geo.kh || geo.width < geo.kw) {
    throw DimensionError("conv2d: kernel " + shape_string(kv.shape()) + " larger than input " +
                         shape_string(xv.shape()));
  }
  if ((geo.height - geo.kh) % stride != 0 || (geo.width - geo.kw) % stride != 0) {
    throw ConfigError("conv2d: output extent (H - k)/stride + 1 is not integral for input " +
                          shape_string(xv.shape()) + ", kernel " + std::to_string(geo.kh) + ", stride " +
                          std::to_string(stride),
                      "stride");
  }
  require_shape(bv, {geo.filters}, "conv2d bias");
  geo.out_h = (geo.height - geo.kh) / stride + 1;
  geo.out_w = (geo.width - geo.kw) / stride + 1;

  auto cols = std::make_shared<AlignedBuffer>(geo.patch() * geo.columns());
  im2col(xv.data(), geo, cols->data());

  RowMatrix prod(static_cast<Eigen::Index>(geo.filters), static_cast<Eigen::Index>(geo.columns()));
  prod.noalias() = as_matrix(kv, geo.filters, geo.patch()) *
                   ConstMatMap(cols->data(), static_cast<Eigen::Index>(geo.patch()),
                               static_cast<Eigen::Index>(geo.columns()));

  Tensor result({geo.batch, geo.filters, geo.out_h, geo.out_w});
  const std::size_t plane = geo.out_plane();
  for (std::size_t b = 0; b < geo.batch; ++b) {
    for (std::size_t f = 0; f < geo.filters; ++f) {
      const double* src = prod.data() + f * geo.columns() + b * plane;
      double* dst = result.data() + (b * geo.filters + f) * plane;
      const double shift = bv[f];
      for (std::size_t p = 0; p < plane; ++p) dst[p] = src[p] + shift;
    }
  }

  if (!tape.any_requires_grad({x, kernels, bias})) cols.reset();
  return tape.record(
      OpKind::conv2d, {x, kernels, bias}, std::move(result),
      [geo, cols](const Tensor& g, std::span<const Tensor* const> inputs, std::span<Tensor* const> grads) {
        const std::size_t plane = geo.out_plane();
        RowMatrix gmat(static_cast<Eigen::Index>(geo.filters), static_cast<Eigen::Index>(geo.columns()));
        for (std::size_t b = 0; b < geo.batch; ++b) {
          for (std::size_t f = 0; f < geo.filters; ++f) {
            const double* src = g.data() + (b * geo.filters + f) * plane;
            std::copy(src, src + plane, gmat.data() + f * geo.columns() + b * plane);
          }
        }
        const ConstMatMap cmat(cols->data(), static_cast<Eigen::Index>(geo.patch()),
                               static_cast<Eigen::Index>(geo.columns()));
        if (grads[1]) as_matrix(*grads[1], geo.filters, geo.patch()).noalias() += gmat * cmat.transpose();
        if (grads[2]) VecMap(grads[2]->data(), static_cast<Eigen::Index>(geo.filters)) += gmat.rowwise().sum();
        if (grads[0]) {
          RowMatrix gcols(static_cast<Eigen::Index>(geo.patch()), static_cast<Eigen::Index>(geo.columns()));
          gcols.noalias() = as_matrix(*inputs[1], geo.filters, geo.patch()).transpose() * gmat;
          col2im_accumulate(gcols.data(), geo, grads[0]->data());
        }
      });
}

Var maxpool2d(Var x, std::size_t window) {
  Tape& tape = x.tape();
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw DimensionError("maxpool2d: input must be [B x C x H x W], got " + shape_string(xv.shape()));
  if (window == 0) throw ConfigError("pool window must be positive", "pool");
  const std::size_t batch = xv.dim(0), channels = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  if (h % window != 0 || w % window != 0) {
    throw DimensionError("maxpool2d: window " + std::to_string(window) + " does not divide spatial extents of " +
                         shape_string(xv.shape()));
  }
  const std::size_t oh = h / window, ow = w / window;
  Tensor result({batch, channels, oh, ow});
  auto argmax = std::make_shared<std::vector<std::size_t>>(result.size());
  for (std::size_t bc = 0; bc < batch * channels; ++bc) {
    const double* plane = xv.data() + bc * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (oy * window) * w + ox * window;
        for (std::size_t i = 0; i < window; ++i) {
          for (std::size_t j = 0; j < window; ++j) {
            const std::size_t idx = (oy * window + i) * w + ox * window + j;
            if (plane[idx] > plane[best]) best = idx;
          }
        }
        const std::size_t o = (bc * oh + oy) * ow + ox;
        result[o] = plane[best];
        (*argmax)[o] = bc * h * w + best;
      }
    }
  }
  if (!tape.any_requires_grad({x})) argmax.reset();
  return tape.record(OpKind::maxpool2d, {x}, std::move(result),
                     [argmax](const Tensor& g, std::span<const Tensor* const>, std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       for (std::size_t o = 0; o < g.size(); ++o) (*grads[0])[(*argmax)[o]] += g[o];
                     });
}

Var relu(Var x) {
  Tape& tape = x.tape();
  Tensor result = x.value();
  for (double& v : result.values()) v = v > 0.0 ? v : 0.0;
  return tape.record(OpKind::relu, {x}, std::move(result),
                     [](const Tensor& g, std::span<const Tensor* const> inputs, std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       const Tensor& xv = *inputs[0];
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (xv[i] > 0.0) (*grads[0])[i] += g[i];
                       }
                     });
}

Var flatten(Var x) {
  Tape& tape = x.tape();
  const Tensor& xv = x.value();
  if (xv.rank() < 1) throw DimensionError("flatten: input must have a batch axis");
  const std::size_t batch = xv.dim(0);
  Tensor result = xv.reshaped({batch, xv.size() / batch});
  return tape.record(OpKind::flatten, {x}, std::move(result),
                     [](const Tensor& g, std::span<const Tensor* const>, std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       for (std::size_t i = 0; i < g.size(); ++i) (*grads[0])[i] += g[i];
                     });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  Tape& tape = logits.tape();
  const Tensor& lv = logits.value();
  if (lv.rank() != 2) throw DimensionError("softmax_cross_entropy: logits must be [B x K], got " + shape_string(lv.shape()));
  const std::size_t batch = lv.dim(0), classes = lv.dim(1);
  if (labels.size() != batch) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
  }
  auto probs = std::make_shared<AlignedBuffer>(lv.size());
  auto targets = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw InputError("label " + std::to_string(label) + " at batch row " + std::to_string(b) +
                       " outside class range [0, " + std::to_string(classes) + ")");
    }
    const double* row = lv.data() + b * classes;
    const double peak = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t k = 0; k < classes; ++k) denom += std::exp(row[k] - peak);
    const double log_denom = std::log(denom);
    for (std::size_t k = 0; k < classes; ++k) (*probs)[b * classes + k] = std::exp(row[k] - peak - log_denom);
    loss += log_denom - (row[label] - peak);
  }
  loss /= static_cast<double>(batch);
  return tape.record(OpKind::softmax_xent, {logits}, Tensor({1}, loss),
                     [probs, targets, batch, classes](const Tensor& g, std::span<const Tensor* const>,
                                                      std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       const double s = g[0] / static_cast<double>(batch);
                       for (std::size_t b = 0; b < batch; ++b) {
                         for (std::size_t k = 0; k < classes; ++k) {
                           const double onehot = static_cast<int>(k) == (*targets)[b] ? 1.0 : 0.0;
                           (*grads[0])[b * classes + k] += s * ((*probs)[b * classes + k] - onehot);
                         }
                       }
                     });
}

Var least_squares(Var prediction, const Tensor& target) {
  Tape& tape = prediction.tape();
  const Tensor& pv = prediction.value();
  if (pv.size() != target.size() || pv.dim(0) != target.dim(0)) {
    throw DimensionError("least_squares: prediction " + shape_string(pv.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  const std::size_t batch = pv.dim(0);
  auto residual = std::make_shared<AlignedBuffer>(pv.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    (*residual)[i] = pv[i] - target[i];
    loss += (*residual)[i] * (*residual)[i];
  }
  loss /= 2.0 * static_cast<double>(batch);
  return tape.record(OpKind::least_squares, {prediction}, Tensor({1}, loss),
                     [residual, batch](const Tensor& g, std::span<const Tensor* const>, std::span<Tensor* const> grads) {
                       if (!grads[0]) return;
                       const double s = g[0] / static_cast<double>(batch);
                       for (std::size_t i = 0; i < residual->size(); ++i) (*grads[0])[i] += s * (*residual)[i];
                     });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_shape(bv, av.shape(), "add");
  Tensor result = av;
  for (std::size_t i = 0; i < result.size(); ++i) result[i] += bv[i];
  return a.tape().record(OpKind::add, {a, b}, std::move(result),
                         [](const Tensor& g, std::span<const Tensor* const>, std::span<Tensor* const> grads) {
                           for (Tensor* slot : grads) {
                             if (!slot) continue;
                             for (std::size_t i = 0; i < g.size(); ++i) (*slot)[i] += g[i];
                           }
                         });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_shape(bv, av.shape(), "mul");
  Tensor result = av;
  for (std::size_t i = 0; i < result.size(); ++i) result[i] *= bv[i];
  return a.tape().record(OpKind::mul, {a, b}, std::move(result),
                         [](const Tensor& g, std::span<const Tensor* const> inputs, std::span<Tensor* const> grads) {
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             if (grads[0]) (*grads[0])[i] += g[i] * (*inputs[1])[i];
                             if (grads[1]) (*grads[1])[i] += g[i] * (*inputs[0])[i];
                           }
                         });
}

Var scale(Var a, double factor) {
  Tensor result = a.value();
  for (double& v : result.values()) v *= factor;
  return a.tape().record(OpKind::scale, {a}, std::move(result),
                         [factor](const Tensor& g, std::span<const Tensor* const>, std::span<Tensor* const> grads) {
                           if (!grads[0]) return;
                           for (std::size_t i = 0; i < g.size(); ++i) (*grads[0])[i] += factor * g[i];
                         });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return a.tape().record(OpKind::sum, {a}, Tensor({1}, total),
                         [](const Tensor& g, std::span<const Tensor* const>, std::span<Tensor* const> grads) {
                           if (!grads[0]) return;
                           for (double& v : grads[0]->values()) v += g[0];
                         });
}

GradientCheck finite_difference_check(const ScalarGraph& f, std::span<const Tensor> params, double step) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive", "step");
  std::vector<Tensor> point(params.begin(), params.end());

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : point) vars.push_back(tape.leaf(p));
    Var root = f(tape, vars);
    tape.backward(root);
    for (Var v : vars) analytic.push_back(tape.grad(v));
  }

  auto evaluate = [&]() {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : point) vars.push_back(tape.leaf(p, false));
    return f(tape, vars).value()[0];
  };

  GradientCheck result;
  for (std::size_t p = 0; p < point.size(); ++p) {
    for (std::size_t i = 0; i < point[p].size(); ++i) {
      const double saved = point[p][i];
      point[p][i] = saved + step;
      const double up = evaluate();
      point[p][i] = saved - step;
      const double down = evaluate();
      point[p][i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (err > result.max_relative_error) result = {err, p, i};
    }
  }
  return result;
}

}  // namespace sgl0
