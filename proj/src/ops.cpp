// SPDX-License-Identifier: Apache-2.0
#include "mcdn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mcdn {

using detail::make_result;
using detail::Node;

namespace {

/// Gradient buffer of parent `i`, or nullptr when it does not need one.
double *parent_grad(Node &self, std::size_t i) {
  Node &p = *self.parents[i];
  if (!p.requires_grad)
    return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

const std::vector<double> &parent_data(const Node &self, std::size_t i) {
  return self.parents[i]->data;
}

void require_matrix(const Tensor &x, const char *op) {
  if (x.rank() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got " +
                     shape_str(x.shape()));
}

void require_same_shape(const Tensor &a, const Tensor &b, const char *op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor &x, Fwd fwd, Deriv deriv) {
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = fwd(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](Node &self) {
    double *g = parent_grad(self, 0);
    if (!g)
      return;
    const auto &xin = parent_data(self, 0);
    for (std::size_t i = 0; i < xin.size(); ++i)
      g[i] += self.grad[i] * deriv(xin[i], self.data[i]);
  });
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

} // namespace

namespace ops {

Tensor reshape(const Tensor &x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](Node &self) {
    if (double *g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] += self.grad[i];
  });
}

Tensor as_row(const Tensor &v) {
  if (v.rank() != 1)
    throw ShapeError("as_row: expected a vector, got " + shape_str(v.shape()));
  return reshape(v, {1, v.numel()});
}

Tensor transpose(const Tensor &x) {
  require_matrix(x, "transpose");
  const std::size_t m = x.rows(), n = x.cols();
  auto in = x.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[j * m + i] = in[i * n + j];
  return make_result({n, m}, std::move(out), {x}, [m, n](Node &self) {
    if (double *g = parent_grad(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          g[i * n + j] += self.grad[j * m + i];
  });
}

Tensor slice_rows(const Tensor &x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  const std::size_t n = x.cols();
  if (begin >= end || end > x.rows())
    throw ShapeError("slice_rows: bad range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") of " + shape_str(x.shape()));
  auto in = x.data();
  std::vector<double> out(in.begin() + static_cast<std::ptrdiff_t>(begin * n),
                          in.begin() + static_cast<std::ptrdiff_t>(end * n));
  return make_result({end - begin, n}, std::move(out), {x}, [begin, n](Node &self) {
    if (double *g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[begin * n + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor &x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  const std::size_t m = x.rows(), n = x.cols();
  if (begin >= end || end > n)
    throw ShapeError("slice_cols: bad range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") of " + shape_str(x.shape()));
  const std::size_t w = end - begin;
  auto in = x.data();
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(i * n + begin), w,
                out.begin() + static_cast<std::ptrdiff_t>(i * w));
  return make_result({m, w}, std::move(out), {x}, [m, n, w, begin](Node &self) {
    if (double *g = parent_grad(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j)
          g[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor reverse_rows(const Tensor &x) {
  require_matrix(x, "reverse_rows");
  const std::size_t m = x.rows(), n = x.cols();
  auto in = x.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>((m - 1 - i) * n), n,
                out.begin() + static_cast<std::ptrdiff_t>(i * n));
  return make_result({m, n}, std::move(out), {x}, [m, n](Node &self) {
    if (double *g = parent_grad(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          g[(m - 1 - i) * n + j] += self.grad[i * n + j];
  });
}

Tensor concat(const std::vector<Tensor> &parts) {
  if (parts.empty())
    throw ShapeError("concat: no inputs");
  const std::size_t rank = parts.front().rank();
  if (rank != 1 && rank != 2)
    throw ShapeError("concat: inputs must be vectors or matrices");
  const std::size_t m = rank == 1 ? 1 : parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto &p : parts) {
    if (p.rank() != rank || (rank == 2 && p.rows() != m))
      throw ShapeError("concat: incompatible part " + shape_str(p.shape()));
    widths.push_back(rank == 1 ? p.numel() : p.cols());
    total += widths.back();
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto in = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(i * widths[k]), widths[k],
                  out.begin() + static_cast<std::ptrdiff_t>(i * total + offset));
    offset += widths[k];
  }
  Shape shape = rank == 1 ? Shape{total} : Shape{m, total};
  return make_result(std::move(shape), std::move(out), parts,
                     [m, total, widths](Node &self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         if (double *g = parent_grad(self, k))
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               g[i * widths[k] + j] += self.grad[i * total + off + j];
                         off += widths[k];
                       }
                     });
}

Tensor stack_rows(const std::vector<Tensor> &parts) {
  if (parts.empty())
    throw ShapeError("stack_rows: no inputs");
  const std::size_t n = parts.front().numel();
  std::vector<double> out;
  out.reserve(parts.size() * n);
  for (const auto &p : parts) {
    if (p.rank() != 1 || p.numel() != n)
      throw ShapeError("stack_rows: expected vectors of length " + std::to_string(n) +
                       ", got " + shape_str(p.shape()));
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return make_result({parts.size(), n}, std::move(out), parts, [n](Node &self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k)
      if (double *g = parent_grad(self, k))
        for (std::size_t j = 0; j < n; ++j)
          g[j] += self.grad[k * n + j];
  });
}

Tensor pad_rows(const Tensor &x, std::size_t count) {
  require_matrix(x, "pad_rows");
  if (count == 0)
    return x;
  std::vector<double> out(x.data().begin(), x.data().end());
  out.resize(out.size() + count * x.cols(), 0.0);
  const std::size_t kept = x.numel();
  return make_result({x.rows() + count, x.cols()}, std::move(out), {x},
                     [kept](Node &self) {
                       if (double *g = parent_grad(self, 0))
                         for (std::size_t i = 0; i < kept; ++i)
                           g[i] += self.grad[i];
                     });
}

Tensor matmul(const Tensor &a, const Tensor &b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0)
        continue;
      const double *brow = B.data() + p * n;
      double *orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j)
        orow[j] += aip * brow[j];
    }
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node &self) {
    const auto &A = parent_data(self, 0);
    const auto &B = parent_data(self, 1);
    const double *G = self.grad.data();
    if (double *ga = parent_grad(self, 0)) // dA = G B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j)
            acc += G[i * n + j] * B[p * n + j];
          ga[i * k + p] += acc;
        }
    if (double *gb = parent_grad(self, 1)) // dB = A^T G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          if (aip == 0.0)
            continue;
          for (std::size_t j = 0; j < n; ++j)
            gb[p * n + j] += aip * G[i * n + j];
        }
  });
}

Tensor add(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node &self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (double *g = parent_grad(self, k))
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          g[i] += self.grad[i];
  });
}

Tensor sub(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.data()[i] - b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node &self) {
    if (double *g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] += self.grad[i];
    if (double *g = parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node &self) {
    const auto &A = parent_data(self, 0);
    const auto &B = parent_data(self, 1);
    if (double *g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] += self.grad[i] * B[i];
    if (double *g = parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] += self.grad[i] * A[i];
  });
}

Tensor add_bias(const Tensor &x, const Tensor &bias) {
  if (bias.rank() != 1)
    throw ShapeError("add_bias: bias must be a vector");
  const std::size_t n = bias.numel();
  if (x.shape().back() != n)
    throw ShapeError("add_bias: " + shape_str(x.shape()) + " + " +
                     shape_str(bias.shape()));
  auto in = x.data();
  auto b = bias.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = in[i] + b[i % n];
  return make_result(x.shape(), std::move(out), {x, bias}, [n](Node &self) {
    if (double *g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] += self.grad[i];
    if (double *g = parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i % n] += self.grad[i];
  });
}

Tensor scale(const Tensor &x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor &x, double value) {
  return unary(
      x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor one_minus(const Tensor &x) {
  return unary(
      x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

Tensor pow_scalar(const Tensor &x, double p) {
  if (p == 0.0)
    return unary(
        x, [](double) { return 1.0; }, [](double, double) { return 0.0; });
  return unary(
      x, [p](double v) { return std::pow(v, p); },
      [p](double v, double) { return p * std::pow(v, p - 1.0); });
}

Tensor log(const Tensor &x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor &x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor &x) {
  return unary(
      x, [](double v) { return v * normal_cdf(v); },
      [](double v, double) {
        const double pdf = std::exp(-0.5 * v * v) * std::numbers::inv_sqrtpi /
                           std::numbers::sqrt2;
        return normal_cdf(v) + v * pdf;
      });
}

Tensor relu(const Tensor &x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor &x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0)
          return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor &x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sum(const Tensor &x) {
  double total = 0.0;
  for (double v : x.data())
    total += v;
  return make_result({1}, {total}, {x}, [](Node &self) {
    if (double *g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.parents[0]->data.size(); ++i)
        g[i] += self.grad[0];
  });
}

Tensor mean(const Tensor &x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum_rows(const Tensor &x) {
  require_matrix(x, "sum_rows");
  const std::size_t m = x.rows(), n = x.cols();
  auto in = x.data();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[j] += in[i * n + j];
  return make_result({n}, std::move(out), {x}, [m, n](Node &self) {
    if (double *g = parent_grad(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          g[i * n + j] += self.grad[j];
  });
}

Tensor masked_mean_rows(const Tensor &x, const Mask &row_mask) {
  require_matrix(x, "masked_mean_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (row_mask.size() != m)
    throw ShapeError("masked_mean_rows: mask length " + std::to_string(row_mask.size()) +
                     " for " + std::to_string(m) + " rows");
  const auto kept = static_cast<std::size_t>(std::count_if(
      row_mask.begin(), row_mask.end(), [](std::uint8_t f) { return f != 0; }));
  if (kept == 0)
    throw NumericError("masked_mean_rows: every row is masked");
  auto in = x.data();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (row_mask[i])
      for (std::size_t j = 0; j < n; ++j)
        out[j] += in[i * n + j];
  const double inv = 1.0 / static_cast<double>(kept);
  for (double &v : out)
    v *= inv;
  return make_result({n}, std::move(out), {x}, [m, n, row_mask, inv](Node &self) {
    if (double *g = parent_grad(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        if (row_mask[i])
          for (std::size_t j = 0; j < n; ++j)
            g[i * n + j] += self.grad[j] * inv;
  });
}

Tensor masked_max_rows(const Tensor &x, const Mask &row_mask) {
  require_matrix(x, "masked_max_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (row_mask.size() != m)
    throw ShapeError("masked_max_rows: mask length mismatch");
  auto in = x.data();
  std::vector<double> out(n, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> arg(n, m);
  for (std::size_t i = 0; i < m; ++i)
    if (row_mask[i])
      for (std::size_t j = 0; j < n; ++j)
        if (arg[j] == m || in[i * n + j] > out[j]) {
          out[j] = in[i * n + j];
          arg[j] = i;
        }
  if (arg[0] == m)
    throw NumericError("masked_max_rows: every row is masked");
  return make_result({n}, std::move(out), {x}, [n, arg](Node &self) {
    if (double *g = parent_grad(self, 0))
      for (std::size_t j = 0; j < n; ++j)
        g[arg[j] * n + j] += self.grad[j];
  });
}

Tensor sum_squares(const Tensor &x, const Mask &frozen_rows) {
  const std::size_t n = x.rank() == 2 ? x.cols() : x.numel();
  const std::size_t m = x.numel() / n;
  if (!frozen_rows.empty() && frozen_rows.size() != m)
    throw ShapeError("sum_squares: frozen-row mask length mismatch");
  auto in = x.data();
  auto counted = [&frozen_rows](std::size_t row) {
    return frozen_rows.empty() || frozen_rows[row] == 0;
  };
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (counted(i))
      for (std::size_t j = 0; j < n; ++j)
        total += in[i * n + j] * in[i * n + j];
  return make_result({1}, {total}, {x}, [m, n, counted](Node &self) {
    if (double *g = parent_grad(self, 0)) {
      const auto &xin = parent_data(self, 0);
      for (std::size_t i = 0; i < m; ++i)
        if (counted(i))
          for (std::size_t j = 0; j < n; ++j)
            g[i * n + j] += 2.0 * xin[i * n + j] * self.grad[0];
    }
  });
}

Tensor softmax_rows(const Tensor &x, const Mask &mask) {
  require_matrix(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (!mask.empty() && mask.size() != m * n)
    throw ShapeError("softmax_rows: mask has " + std::to_string(mask.size()) +
                     " flags for " + shape_str(x.shape()));
  auto keep = [&mask](std::size_t idx) { return mask.empty() || mask[idx] != 0; };
  auto in = x.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j)
      if (keep(i * n + j)) {
        hi = std::max(hi, in[i * n + j]);
        any = true;
      }
    if (!any)
      throw NumericError("softmax_rows: row " + std::to_string(i) + " is fully masked");
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (keep(i * n + j)) {
        out[i * n + j] = std::exp(in[i * n + j] - hi);
        z += out[i * n + j];
      }
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] /= z;
  }
  return make_result({m, n}, std::move(out), {x}, [m, n](Node &self) {
    double *g = parent_grad(self, 0);
    if (!g)
      return;
    const double *y = self.data.data();
    const double *dy = self.grad.data();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        dot += y[i * n + j] * dy[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        g[i * n + j] += y[i * n + j] * (dy[i * n + j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor &x, const Tensor &gain, const Tensor &bias, double eps) {
  require_matrix(x, "layer_norm");
  if (!(eps > 0.0))
    throw std::invalid_argument("layer_norm: eps must be positive");
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.rank() != 1 || gain.numel() != n || bias.rank() != 1 || bias.numel() != n)
    throw ShapeError("layer_norm: gain/bias must be vectors of length " +
                     std::to_string(n));
  auto in = x.data();
  auto gw = gain.data();
  auto bw = bias.data();
  std::vector<double> normalized(m * n);
  std::vector<double> inv_std(m);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double *row = in.data() + i * n;
    // Offsets from the row's first entry, so a uniform shift cancels before
    // any rounding that depends on the magnitude of the shift.
    const double ref = row[0];
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      mu += row[j] - ref;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = (row[j] - ref) - mu;
      var += c * c;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      normalized[i * n + j] = ((row[j] - ref) - mu) * inv_std[i];
      out[i * n + j] = normalized[i * n + j] * gw[j] + bw[j];
    }
  }
  return make_result(
      {m, n}, std::move(out), {x, gain, bias},
      [m, n, normalized = std::move(normalized), inv_std = std::move(inv_std)](Node &self) {
        const double *dy = self.grad.data();
        const auto &gw = parent_data(self, 1);
        if (double *gg = parent_grad(self, 1))
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              gg[j] += dy[i * n + j] * normalized[i * n + j];
        if (double *gb = parent_grad(self, 2))
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              gb[j] += dy[i * n + j];
        if (double *gx = parent_grad(self, 0)) {
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = dy[i * n + j] * gw[j];
              mean_d += d;
              mean_dx += d * normalized[i * n + j];
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = dy[i * n + j] * gw[j];
              gx[i * n + j] +=
                  inv_std[i] * (d - mean_d - normalized[i * n + j] * mean_dx);
            }
          }
        }
      });
}

Tensor conv1d_same(const Tensor &x, const Tensor &kernels, const Tensor &bias) {
  require_matrix(x, "conv1d_same");
  if (kernels.rank() != 3)
    throw ShapeError("conv1d_same: kernels must be [w x d_in x c], got " +
                     shape_str(kernels.shape()));
  const std::size_t T = x.rows(), din = x.cols();
  const std::size_t w = kernels.shape()[0], c = kernels.shape()[2];
  if (kernels.shape()[1] != din)
    throw ShapeError("conv1d_same: input width " + std::to_string(din) +
                     " does not match kernels " + shape_str(kernels.shape()));
  if (bias.rank() != 1 || bias.numel() != c)
    throw ShapeError("conv1d_same: bias must have length " + std::to_string(c));
  const auto pad_left = static_cast<std::ptrdiff_t>((w - 1) / 2);
  auto X = x.data();
  auto K = kernels.data();
  auto B = bias.data();
  std::vector<double> out(T * c);
  for (std::size_t t = 0; t < T; ++t)
    std::copy(B.begin(), B.end(), out.begin() + static_cast<std::ptrdiff_t>(t * c));
  // Source row for output t and tap j, or -1 when it falls in the padding.
  auto source = [T, pad_left](std::size_t t, std::size_t j) -> std::ptrdiff_t {
    const std::ptrdiff_t s =
        static_cast<std::ptrdiff_t>(t + j) - pad_left;
    return (s < 0 || s >= static_cast<std::ptrdiff_t>(T)) ? -1 : s;
  };
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < w; ++j) {
      const std::ptrdiff_t s = source(t, j);
      if (s < 0)
        continue;
      for (std::size_t i = 0; i < din; ++i) {
        const double xv = X[static_cast<std::size_t>(s) * din + i];
        if (xv == 0.0)
          continue;
        const double *krow = K.data() + (j * din + i) * c;
        double *orow = out.data() + t * c;
        for (std::size_t o = 0; o < c; ++o)
          orow[o] += xv * krow[o];
      }
    }
  return make_result({T, c}, std::move(out), {x, kernels, bias},
                     [T, din, w, c, source](Node &self) {
                       const auto &X = parent_data(self, 0);
                       const auto &K = parent_data(self, 1);
                       const double *G = self.grad.data();
                       double *gx = parent_grad(self, 0);
                       double *gk = parent_grad(self, 1);
                       if (double *gb = parent_grad(self, 2))
                         for (std::size_t t = 0; t < T; ++t)
                           for (std::size_t o = 0; o < c; ++o)
                             gb[o] += G[t * c + o];
                       if (!gx && !gk)
                         return;
                       for (std::size_t t = 0; t < T; ++t)
                         for (std::size_t j = 0; j < w; ++j) {
                           const std::ptrdiff_t s = source(t, j);
                           if (s < 0)
                             continue;
                           const auto su = static_cast<std::size_t>(s);
                           for (std::size_t i = 0; i < din; ++i) {
                             const std::size_t kbase = (j * din + i) * c;
                             double acc = 0.0;
                             for (std::size_t o = 0; o < c; ++o) {
                               acc += G[t * c + o] * K[kbase + o];
                               if (gk)
                                 gk[kbase + o] += G[t * c + o] * X[su * din + i];
                             }
                             if (gx)
                               gx[su * din + i] += acc;
                           }
                         }
                     });
}

Tensor max_over_time(const Tensor &x) {
  require_matrix(x, "max_over_time");
  return masked_max_rows(x, Mask(x.rows(), 1));
}

Tensor dropout(const Tensor &x, double rate, Rng &rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  if (!training || rate == 0.0)
    return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> factor(x.numel());
  for (double &f : factor)
    f = rng.uniform() < rate ? 0.0 : keep_scale;
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = in[i] * factor[i];
  return make_result(x.shape(), std::move(out), {x},
                     [factor = std::move(factor)](Node &self) {
                       if (double *g = parent_grad(self, 0))
                         for (std::size_t i = 0; i < factor.size(); ++i)
                           g[i] += self.grad[i] * factor[i];
                     });
}

Tensor embedding(const Tensor &table, const std::vector<std::size_t> &ids,
                 const Mask &frozen_rows) {
  require_matrix(table, "embedding");
  const std::size_t V = table.rows(), d = table.cols();
  if (ids.empty())
    throw ShapeError("embedding: empty id list");
  if (!frozen_rows.empty() && frozen_rows.size() != V)
    throw ShapeError("embedding: frozen-row mask length mismatch");
  auto T = table.data();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= V)
      throw ShapeError("embedding: id " + std::to_string(ids[i]) +
                       " out of range for table with " + std::to_string(V) + " rows");
    std::copy_n(T.begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return make_result({ids.size(), d}, std::move(out), {table},
                     [ids, d, frozen_rows](Node &self) {
                       if (double *g = parent_grad(self, 0))
                         for (std::size_t i = 0; i < ids.size(); ++i) {
                           if (!frozen_rows.empty() && frozen_rows[ids[i]])
                             continue;
                           for (std::size_t j = 0; j < d; ++j)
                             g[ids[i] * d + j] += self.grad[i * d + j];
                         }
                     });
}

} // namespace ops

GruOutput gru_layer(const Tensor &x, const Tensor &h0, const GruWeights &weights,
                    Direction direction) {
  if (x.rank() != 2)
    throw ShapeError("gru_layer: input must be [T x d_in]");
  const std::size_t h = weights.hidden();
  if (weights.bias.numel() != 3 * h || weights.input.rank() != 2 ||
      weights.input.rows() != x.cols() || weights.input.cols() != 3 * h ||
      weights.recurrent.rank() != 2 || weights.recurrent.rows() != h ||
      weights.recurrent.cols() != 3 * h)
    throw ShapeError("gru_layer: weight shapes inconsistent with input " +
                     shape_str(x.shape()) + " and hidden size " + std::to_string(h));
  if (h0.numel() != h)
    throw ShapeError("gru_layer: h0 must have length " + std::to_string(h));

  const std::size_t T = x.rows(), din = x.cols(), G = 3 * h;
  const auto X = x.data();
  const auto W = weights.input.data();
  const auto U = weights.recurrent.data();
  const auto B = weights.bias.data();

  // Per traversal step: gates z, r, candidate c, and the incoming state.
  std::vector<double> z(T * h), r(T * h), c(T * h), prev(T * h), states(T * h);
  std::vector<double> state(h0.data().begin(), h0.data().end());
  std::vector<double> a(G), hu(2 * h), rh(h);
  auto sigmoid_of = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = direction == Direction::forward ? s : T - 1 - s;
    std::copy(B.begin(), B.end(), a.begin());
    for (std::size_t i = 0; i < din; ++i) {
      const double xi = X[t * din + i];
      for (std::size_t j = 0; j < G; ++j)
        a[j] += xi * W[i * G + j];
    }
    std::fill(hu.begin(), hu.end(), 0.0);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < 2 * h; ++j)
        hu[j] += state[i] * U[i * G + j];
    double *zs = &z[s * h], *rs = &r[s * h], *cs = &c[s * h];
    for (std::size_t j = 0; j < h; ++j) {
      zs[j] = sigmoid_of(a[j] + hu[j]);
      rs[j] = sigmoid_of(a[h + j] + hu[h + j]);
      rh[j] = rs[j] * state[j];
    }
    for (std::size_t j = 0; j < h; ++j) {
      double acc = a[2 * h + j];
      for (std::size_t i = 0; i < h; ++i)
        acc += rh[i] * U[i * G + 2 * h + j];
      cs[j] = std::tanh(acc);
    }
    std::copy(state.begin(), state.end(), prev.begin() + static_cast<std::ptrdiff_t>(s * h));
    for (std::size_t j = 0; j < h; ++j)
      state[j] += zs[j] * (cs[j] - state[j]);
    std::copy(state.begin(), state.end(), states.begin() + static_cast<std::ptrdiff_t>(s * h));
  }

  Tensor h0_vec = h0.rank() == 1 ? h0 : ops::reshape(h0, {h});
  auto all = make_result(
      {T, h}, std::move(states), {x, h0_vec, weights.input, weights.recurrent, weights.bias},
      [T, din, h, G, direction, z = std::move(z), r = std::move(r), c = std::move(c),
       prev = std::move(prev)](Node &self) {
        const auto &X = parent_data(self, 0);
        const auto &W = parent_data(self, 2);
        const auto &U = parent_data(self, 3);
        double *gx = parent_grad(self, 0);
        double *gh0 = parent_grad(self, 1);
        double *gw = parent_grad(self, 2);
        double *gu = parent_grad(self, 3);
        double *gb = parent_grad(self, 4);
        std::vector<double> dh(h, 0.0), dprev(h), da(G), drh(h), rh(h);
        for (std::size_t s = T; s-- > 0;) {
          const std::size_t t = direction == Direction::forward ? s : T - 1 - s;
          const double *zs = &z[s * h], *rs = &r[s * h], *cs = &c[s * h], *hp = &prev[s * h];
          for (std::size_t j = 0; j < h; ++j)
            dh[j] += self.grad[s * h + j];
          for (std::size_t j = 0; j < h; ++j) {
            const double dz = dh[j] * (cs[j] - hp[j]);
            const double dc = dh[j] * zs[j];
            dprev[j] = dh[j] * (1.0 - zs[j]);
            da[j] = dz * zs[j] * (1.0 - zs[j]);
            da[2 * h + j] = dc * (1.0 - cs[j] * cs[j]);
            rh[j] = rs[j] * hp[j];
          }
          // Candidate path through r * h_prev.
          for (std::size_t i = 0; i < h; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < h; ++j)
              acc += da[2 * h + j] * U[i * G + 2 * h + j];
            drh[i] = acc;
          }
          for (std::size_t j = 0; j < h; ++j) {
            const double dr = drh[j] * hp[j];
            dprev[j] += drh[j] * rs[j];
            da[h + j] = dr * rs[j] * (1.0 - rs[j]);
          }
          // Gate path through h_prev U[:, :2h].
          for (std::size_t i = 0; i < h; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < 2 * h; ++j)
              acc += da[j] * U[i * G + j];
            dprev[i] += acc;
          }
          if (gu)
            for (std::size_t i = 0; i < h; ++i) {
              for (std::size_t j = 0; j < 2 * h; ++j)
                gu[i * G + j] += hp[i] * da[j];
              for (std::size_t j = 0; j < h; ++j)
                gu[i * G + 2 * h + j] += rh[i] * da[2 * h + j];
            }
          if (gb)
            for (std::size_t j = 0; j < G; ++j)
              gb[j] += da[j];
          if (gw)
            for (std::size_t i = 0; i < din; ++i) {
              const double xi = X[t * din + i];
              for (std::size_t j = 0; j < G; ++j)
                gw[i * G + j] += xi * da[j];
            }
          if (gx)
            for (std::size_t i = 0; i < din; ++i) {
              double acc = 0.0;
              for (std::size_t j = 0; j < G; ++j)
                acc += da[j] * W[i * G + j];
              gx[t * din + i] += acc;
            }
          dh.swap(dprev);
        }
        if (gh0)
          for (std::size_t j = 0; j < h; ++j)
            gh0[j] += dh[j];
      });
  GruOutput out;
  out.states = all;
  out.final = ops::reshape(ops::slice_rows(all, T - 1, T), {h});
  return out;
}

} // namespace mcdn
