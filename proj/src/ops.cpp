#include "bysgnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "bysgnn/error.hpp"
#include "bysgnn/simd.hpp"

namespace bysgnn::ops {
namespace {

using detail::Node;

const std::vector<double>& val(const Tensor& t) { return t.node()->value; }

// Gradient buffer of an operand, or nullptr when it does not require grad.
std::vector<double>* grad_of(const Tensor& t) {
  if (!t.requires_grad()) return nullptr;
  auto* n = t.node().get();
  n->ensure_grad();
  return &n->grad;
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined operand");
}

template <typename F>
void parallel_for(std::size_t count, F&& fn) {
  const unsigned threads = std::min<std::size_t>(num_threads(), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += threads) fn(i);
    });
  }
}

enum class Bcast { same, row, scalar };

Bcast classify(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return Bcast::same;
  if (sb.empty()) return Bcast::scalar;
  if (sa.size() >= 2 && sb.size() + 1 == sa.size() && sb.back() == sa.back() &&
      std::equal(sb.begin(), sb.end() - 1, sa.begin())) {
    return Bcast::row;
  }
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
}

// Broadcast geometry of operand b relative to a.
struct BIndex {
  Bcast kind;
  std::size_t n = 1;       // last axis
  std::size_t block = 1;   // m * n
};

BIndex bindex(const Tensor& a, Bcast kind) {
  BIndex ix{kind};
  if (kind == Bcast::row) {
    const Shape& s = a.shape();
    ix.n = s.back();
    ix.block = s[s.size() - 2] * s.back();
  }
  return ix;
}

// Calls f(a_offset, b_offset, length) over contiguous runs that pair
// elements of `a` with elements of b under a same/row broadcast.
template <typename F>
void for_segments(const BIndex& bi, std::size_t total, F&& f) {
  if (bi.kind == Bcast::row) {
    if (bi.block == 0) return;
    const std::size_t rows = bi.block / bi.n;
    for (std::size_t o = 0; o < total / bi.block; ++o)
      for (std::size_t r = 0; r < rows; ++r) f(o * bi.block + r * bi.n, o * bi.n, bi.n);
  } else {
    f(0, 0, total);
  }
}

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& a, const char* name, Fwd fwd, Bwd bwd) {
  require_defined(a, name);
  const auto& x = val(a);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return make_result(a.shape(), std::move(out), {a}, [a, bwd](Node& self) {
    auto* ga = grad_of(a);
    const auto& x = val(a);
    for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += self.grad[i] * bwd(x[i], self.value[i]);
  });
}

Shape without_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2) throw DimensionError("matmul: left operand must have rank >= 2, got " + shape_str(sa));
  const std::size_t k = sa.back();

  if (sb.size() == 2) {
    if (sb[0] != k) throw DimensionError("matmul: inner dimensions differ: " + shape_str(sa) + " x " + shape_str(sb));
    const std::size_t n = sb[1];
    const std::size_t rows = a.numel() / k;
    Shape out_shape = without_last(sa);
    out_shape.push_back(n);
    std::vector<double> out(rows * n, 0.0);
    simd::kernels().gemm_nn(rows, n, k, val(a).data(), val(b).data(), out.data());
    return make_result(std::move(out_shape), std::move(out), {a, b}, [a, b, rows, n, k](Node& self) {
      const auto& kt = simd::kernels();
      if (auto* ga = grad_of(a)) kt.gemm_nt(rows, k, n, self.grad.data(), val(b).data(), ga->data());
      if (auto* gb = grad_of(b)) kt.gemm_tn(k, n, rows, val(a).data(), self.grad.data(), gb->data());
    });
  }

  if (sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] && sb[1] == k) {
    const std::size_t batch = sa[0], m = sa[1], n = sb[2];
    std::vector<double> out(batch * m * n, 0.0);
    const double* pa = val(a).data();
    const double* pb = val(b).data();
    parallel_for(batch, [&](std::size_t i) {
      simd::kernels().gemm_nn(m, n, k, pa + i * m * k, pb + i * k * n, out.data() + i * m * n);
    });
    return make_result({batch, m, n}, std::move(out), {a, b}, [a, b, batch, m, n, k](Node& self) {
      auto* ga = grad_of(a);
      auto* gb = grad_of(b);
      const double* pa = val(a).data();
      const double* pb = val(b).data();
      const double* g = self.grad.data();
      parallel_for(batch, [&](std::size_t i) {
        const auto& kt = simd::kernels();
        if (ga) kt.gemm_nt(m, k, n, g + i * m * n, pb + i * k * n, ga->data() + i * m * k);
        if (gb) kt.gemm_tn(k, n, m, pa + i * m * k, g + i * m * n, gb->data() + i * k * n);
      });
    });
  }

  throw DimensionError("matmul: incompatible shapes " + shape_str(sa) + " x " + shape_str(sb));
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  const Bcast kind = classify(a, b, "add");
  const BIndex bi = bindex(a, kind);
  const auto& x = val(a);
  const auto& y = val(b);
  std::vector<double> out(x.size());
  if (kind == Bcast::scalar) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[0];
  } else {
    const auto& kt = simd::kernels();
    for_segments(bi, x.size(), [&](std::size_t ao, std::size_t bo, std::size_t len) {
      kt.add(len, x.data() + ao, y.data() + bo, out.data() + ao);
    });
  }
  return make_result(a.shape(), std::move(out), {a, b}, [a, b, bi](Node& self) {
    const auto& kt = simd::kernels();
    if (auto* ga = grad_of(a)) kt.axpy(self.grad.size(), 1.0, self.grad.data(), ga->data());
    if (auto* gb = grad_of(b)) {
      if (bi.kind == Bcast::scalar) (*gb)[0] += kt.sum(self.grad.size(), self.grad.data());
      else for_segments(bi, self.grad.size(), [&](std::size_t ao, std::size_t bo, std::size_t len) {
        kt.axpy(len, 1.0, self.grad.data() + ao, gb->data() + bo);
      });
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  const Bcast kind = classify(a, b, "sub");
  const BIndex bi = bindex(a, kind);
  const auto& x = val(a);
  const auto& y = val(b);
  std::vector<double> out(x.size());
  if (kind == Bcast::scalar) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[0];
  } else {
    for_segments(bi, x.size(), [&](std::size_t ao, std::size_t bo, std::size_t len) {
      for (std::size_t i = 0; i < len; ++i) out[ao + i] = x[ao + i] - y[bo + i];
    });
  }
  return make_result(a.shape(), std::move(out), {a, b}, [a, b, bi](Node& self) {
    const auto& kt = simd::kernels();
    if (auto* ga = grad_of(a)) kt.axpy(self.grad.size(), 1.0, self.grad.data(), ga->data());
    if (auto* gb = grad_of(b)) {
      if (bi.kind == Bcast::scalar) (*gb)[0] -= kt.sum(self.grad.size(), self.grad.data());
      else for_segments(bi, self.grad.size(), [&](std::size_t ao, std::size_t bo, std::size_t len) {
        kt.axpy(len, -1.0, self.grad.data() + ao, gb->data() + bo);
      });
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  const Bcast kind = classify(a, b, "mul");
  const BIndex bi = bindex(a, kind);
  const auto& x = val(a);
  const auto& y = val(b);
  std::vector<double> out(x.size());
  const auto& kt = simd::kernels();
  if (kind == Bcast::scalar) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[0];
  } else {
    for_segments(bi, x.size(), [&](std::size_t ao, std::size_t bo, std::size_t len) {
      kt.mul(len, x.data() + ao, y.data() + bo, out.data() + ao);
    });
  }
  return make_result(a.shape(), std::move(out), {a, b}, [a, b, bi](Node& self) {
    const auto& x = val(a);
    const auto& y = val(b);
    const auto& kt = simd::kernels();
    const double* g = self.grad.data();
    if (auto* ga = grad_of(a)) {
      if (bi.kind == Bcast::scalar) kt.axpy(x.size(), y[0], g, ga->data());
      else for_segments(bi, x.size(), [&](std::size_t ao, std::size_t bo, std::size_t len) {
        kt.mul_acc(len, g + ao, y.data() + bo, ga->data() + ao);
      });
    }
    if (auto* gb = grad_of(b)) {
      if (bi.kind == Bcast::scalar) (*gb)[0] += kt.dot(x.size(), g, x.data());
      else for_segments(bi, x.size(), [&](std::size_t ao, std::size_t bo, std::size_t len) {
        kt.mul_acc(len, g + ao, x.data() + ao, gb->data() + bo);
      });
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, "scale", [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, "add_scalar", [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor& a) {
  require_defined(a, "tanh");
  std::vector<double> out(a.numel());
  simd::kernels().tanh(out.size(), val(a).data(), out.data());
  return make_result(a.shape(), std::move(out), {a}, [a](Node& self) {
    auto* ga = grad_of(a);
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      const double y = self.value[i];
      (*ga)[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  require_defined(a, "sigmoid");
  std::vector<double> out(a.numel());
  simd::kernels().sigmoid(out.size(), val(a).data(), out.data());
  return make_result(a.shape(), std::move(out), {a}, [a](Node& self) {
    auto* ga = grad_of(a);
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      const double y = self.value[i];
      (*ga)[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor gru_cell(const Tensor& x_proj, const Tensor& h_proj, const Tensor& h) {
  require_defined(x_proj, "gru_cell");
  require_defined(h_proj, "gru_cell");
  require_defined(h, "gru_cell");
  const Shape& sh = h.shape();
  if (sh.empty() || sh.back() == 0) throw DimensionError("gru_cell: hidden state needs a non-empty last axis");
  const std::size_t m = sh.back();
  Shape gates = sh;
  gates.back() = 3 * m;
  if (x_proj.shape() != gates || h_proj.shape() != gates) {
    throw DimensionError("gru_cell: projections must be " + shape_str(gates) + ", got " + shape_str(x_proj.shape()) +
                         " and " + shape_str(h_proj.shape()));
  }
  const std::size_t rows = h.numel() / m;
  const auto& x = val(x_proj);
  const auto& p = val(h_proj);
  const auto& hv = val(h);
  // Per row: [r | z | n] activations, kept for the backward pass.
  auto act = std::make_shared<std::vector<double>>(rows * 3 * m);
  double* A = act->data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xi = x.data() + i * 3 * m;
    const double* pi = p.data() + i * 3 * m;
    double* ai = A + i * 3 * m;
    for (std::size_t j = 0; j < 2 * m; ++j) ai[j] = xi[j] + pi[j];
  }
  const auto& kt = simd::kernels();
  for (std::size_t i = 0; i < rows; ++i) kt.sigmoid(2 * m, A + i * 3 * m, A + i * 3 * m);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xi = x.data() + i * 3 * m;
    const double* pi = p.data() + i * 3 * m;
    double* ai = A + i * 3 * m;
    for (std::size_t j = 0; j < m; ++j) ai[2 * m + j] = xi[2 * m + j] + ai[j] * pi[2 * m + j];
    kt.tanh(m, ai + 2 * m, ai + 2 * m);
  }
  std::vector<double> out(rows * m);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* ai = A + i * 3 * m;
    const double* hi = hv.data() + i * m;
    double* oi = out.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) oi[j] = hi[j] + ai[m + j] * (ai[2 * m + j] - hi[j]);
  }
  return make_result(sh, std::move(out), {x_proj, h_proj, h}, [x_proj, h_proj, h, act, m, rows](Node& self) {
    auto* gx = grad_of(x_proj);
    auto* gp = grad_of(h_proj);
    auto* gh = grad_of(h);
    const auto& p = val(h_proj);
    const auto& hv = val(h);
    const double* A = act->data();
    std::vector<double> d(3 * m);  // pre-activation grads [r | z | n]
    for (std::size_t i = 0; i < rows; ++i) {
      const double* g = self.grad.data() + i * m;
      const double* ai = A + i * 3 * m;
      const double* pi = p.data() + i * 3 * m;
      const double* hi = hv.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) {
        const double r = ai[j], z = ai[m + j], n = ai[2 * m + j];
        const double dn = g[j] * z * (1.0 - n * n);
        d[2 * m + j] = dn;
        d[m + j] = g[j] * (n - hi[j]) * z * (1.0 - z);
        d[j] = dn * pi[2 * m + j] * r * (1.0 - r);
      }
      if (gh)
        for (std::size_t j = 0; j < m; ++j) (*gh)[i * m + j] += g[j] * (1.0 - ai[m + j]);
      if (gx)
        for (std::size_t j = 0; j < 3 * m; ++j) (*gx)[i * 3 * m + j] += d[j];
      if (gp) {
        double* gpi = gp->data() + i * 3 * m;
        for (std::size_t j = 0; j < 2 * m; ++j) gpi[j] += d[j];
        for (std::size_t j = 0; j < m; ++j) gpi[2 * m + j] += d[2 * m + j] * ai[j];
      }
    }
  });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor pow(const Tensor& a, double p) {
  return unary(a, "pow", [p](double x) { return std::pow(x, p); },
               [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Tensor abs(const Tensor& a) {
  return unary(a, "abs", [](double x) { return std::fabs(x); },
               [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor clamp_min(const Tensor& a, double lo) {
  return unary(a, "clamp_min", [lo](double x) { return x > lo ? x : lo; },
               [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_last: no operands");
  for (const auto& p : parts) require_defined(p, "concat_last");
  const Shape lead = without_last(parts[0].shape());
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() == 0 || without_last(p.shape()) != lead) {
      throw DimensionError("concat_last: leading shapes differ: " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    widths.push_back(p.shape().back());
    total += p.shape().back();
  }
  const std::size_t rows = shape_numel(lead);
  std::vector<double> out(rows * total);
  std::size_t off = 0;
  for (std::size_t q = 0; q < parts.size(); ++q) {
    const auto& x = val(parts[q]);
    const std::size_t w = widths[q];
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.data() + r * w, w, out.data() + r * total + off);
    off += w;
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  return make_result(std::move(out_shape), std::move(out), parts, [parts, widths, rows, total](Node& self) {
    std::size_t off = 0;
    for (std::size_t q = 0; q < parts.size(); ++q) {
      const std::size_t w = widths[q];
      if (auto* g = grad_of(parts[q])) {
        for (std::size_t r = 0; r < rows; ++r) {
          simd::kernels().axpy(w, 1.0, self.grad.data() + r * total + off, g->data() + r * w);
        }
      }
      off += w;
    }
  });
}

Tensor slice_last(const Tensor& a, std::size_t begin, std::size_t end) {
  require_defined(a, "slice_last");
  if (a.rank() == 0 || begin >= end || end > a.shape().back()) {
    throw DimensionError("slice_last: bad range [" + std::to_string(begin) + "," + std::to_string(end) + ") for " +
                         shape_str(a.shape()));
  }
  const std::size_t width = a.shape().back();
  const std::size_t w = end - begin;
  const std::size_t rows = a.numel() / width;
  const auto& x = val(a);
  std::vector<double> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.data() + r * width + begin, w, out.data() + r * w);
  Shape s = a.shape();
  s.back() = w;
  return make_result(std::move(s), std::move(out), {a}, [a, begin, width, w, rows](Node& self) {
    auto* g = grad_of(a);
    for (std::size_t r = 0; r < rows; ++r) {
      simd::kernels().axpy(w, 1.0, self.grad.data() + r * w, g->data() + r * width + begin);
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_defined(a, "slice_rows");
  if (a.rank() < 2) throw DimensionError("slice_rows: rank >= 2 required, got " + shape_str(a.shape()));
  const Shape& s = a.shape();
  const std::size_t m = s[s.size() - 2];
  const std::size_t n = s.back();
  if (begin >= end || end > m) {
    throw DimensionError("slice_rows: bad range [" + std::to_string(begin) + "," + std::to_string(end) + ") for " +
                         shape_str(s));
  }
  const std::size_t groups = a.numel() / (m * n);
  const std::size_t h = end - begin;
  const auto& x = val(a);
  std::vector<double> out(groups * h * n);
  for (std::size_t g = 0; g < groups; ++g) {
    std::copy_n(x.data() + (g * m + begin) * n, h * n, out.data() + g * h * n);
  }
  Shape os = s;
  os[os.size() - 2] = h;
  return make_result(std::move(os), std::move(out), {a}, [a, groups, m, n, h, begin](Node& self) {
    auto* gr = grad_of(a);
    for (std::size_t g = 0; g < groups; ++g) {
      simd::kernels().axpy(h * n, 1.0, self.grad.data() + g * h * n, gr->data() + (g * m + begin) * n);
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  if (a.rank() < 2) throw DimensionError("transpose: rank >= 2 required, got " + shape_str(a.shape()));
  const Shape& s = a.shape();
  const std::size_t m = s[s.size() - 2];
  const std::size_t n = s.back();
  const std::size_t groups = a.numel() / (m * n);
  const auto& x = val(a);
  std::vector<double> out(x.size());
  for (std::size_t g = 0; g < groups; ++g) {
    const double* src = x.data() + g * m * n;
    double* dst = out.data() + g * m * n;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
  }
  Shape os = s;
  std::swap(os[os.size() - 1], os[os.size() - 2]);
  return make_result(std::move(os), std::move(out), {a}, [a, groups, m, n](Node& self) {
    auto* gr = grad_of(a);
    for (std::size_t g = 0; g < groups; ++g) {
      const double* src = self.grad.data() + g * m * n;
      double* dst = gr->data() + g * m * n;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dst[i * n + j] += src[j * m + i];
    }
  });
}

Tensor swap_leading(const Tensor& a) {
  require_defined(a, "swap_leading");
  if (a.rank() != 3) throw DimensionError("swap_leading: rank 3 required, got " + shape_str(a.shape()));
  const std::size_t d0 = a.dim(0), d1 = a.dim(1), d2 = a.dim(2);
  const auto& x = val(a);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < d0; ++i)
    for (std::size_t j = 0; j < d1; ++j) std::copy_n(x.data() + (i * d1 + j) * d2, d2, out.data() + (j * d0 + i) * d2);
  return make_result({d1, d0, d2}, std::move(out), {a}, [a, d0, d1, d2](Node& self) {
    auto* g = grad_of(a);
    for (std::size_t i = 0; i < d0; ++i)
      for (std::size_t j = 0; j < d1; ++j)
        simd::kernels().axpy(d2, 1.0, self.grad.data() + (j * d0 + i) * d2, g->data() + (i * d1 + j) * d2);
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape) + " changes element count");
  }
  return make_result(std::move(shape), val(a), {a}, [a](Node& self) {
    simd::kernels().axpy(self.grad.size(), 1.0, self.grad.data(), grad_of(a)->data());
  });
}

Tensor broadcast_batch(const Tensor& a, std::size_t batch) {
  require_defined(a, "broadcast_batch");
  const auto& x = val(a);
  std::vector<double> out(batch * x.size());
  for (std::size_t b = 0; b < batch; ++b) std::copy(x.begin(), x.end(), out.begin() + b * x.size());
  Shape s{batch};
  s.insert(s.end(), a.shape().begin(), a.shape().end());
  return make_result(std::move(s), std::move(out), {a}, [a, batch](Node& self) {
    auto* g = grad_of(a);
    const std::size_t n = g->size();
    for (std::size_t b = 0; b < batch; ++b) simd::kernels().axpy(n, 1.0, self.grad.data() + b * n, g->data());
  });
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  const double s = simd::kernels().sum(a.numel(), val(a).data());
  return make_result({}, {s}, {a}, [a](Node& self) {
    auto* g = grad_of(a);
    const double d = self.grad[0];
    for (double& v : *g) v += d;
  });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  const double n = static_cast<double>(a.numel());
  return scale(sum(a), 1.0 / n);
}

Tensor sum_last(const Tensor& a) {
  require_defined(a, "sum_last");
  if (a.rank() == 0) throw DimensionError("sum_last: rank >= 1 required");
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.numel() / n;
  const auto& x = val(a);
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = simd::kernels().sum(n, x.data() + r * n);
  return make_result(without_last(a.shape()), std::move(out), {a}, [a, n, rows](Node& self) {
    auto* g = grad_of(a);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < n; ++j) (*g)[r * n + j] += self.grad[r];
  });
}

Tensor mean_last(const Tensor& a) {
  require_defined(a, "mean_last");
  if (a.rank() == 0) throw DimensionError("mean_last: rank >= 1 required");
  return scale(sum_last(a), 1.0 / static_cast<double>(a.shape().back()));
}

Tensor max_last(const Tensor& a) {
  require_defined(a, "max_last");
  if (a.rank() == 0 || a.shape().back() == 0) throw DimensionError("max_last: non-empty last axis required");
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.numel() / n;
  const auto& x = val(a);
  std::vector<double> out(rows);
  std::vector<std::size_t> arg(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x.data() + r * n;
    arg[r] = static_cast<std::size_t>(std::max_element(row, row + n) - row);
    out[r] = row[arg[r]];
  }
  return make_result(without_last(a.shape()), std::move(out), {a}, [a, n, arg](Node& self) {
    auto* g = grad_of(a);
    for (std::size_t r = 0; r < arg.size(); ++r) (*g)[r * n + arg[r]] += self.grad[r];
  });
}

Tensor softmax_last(const Tensor& a) {
  require_defined(a, "softmax_last");
  if (a.rank() == 0) throw DimensionError("softmax_last: rank >= 1 required");
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.numel() / n;
  const auto& x = val(a);
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= z;
  }
  return make_result(a.shape(), std::move(out), {a}, [a, n, rows](Node& self) {
    auto* g = grad_of(a);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * n;
      const double* dy = self.grad.data() + r * n;
      const double dot = simd::kernels().dot(n, y, dy);
      for (std::size_t j = 0; j < n; ++j) (*g)[r * n + j] += y[j] * (dy[j] - dot);
    }
  });
}

Tensor layer_norm_last(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_defined(x, "layer_norm_last");
  if (x.rank() == 0) throw DimensionError("layer_norm_last: rank >= 1 required");
  const std::size_t d = x.shape().back();
  if (d < 2) throw DimensionError("layer_norm_last: at least 2 features required");
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw DimensionError("layer_norm_last: gain/bias must have shape [" + std::to_string(d) + "]");
  }
  const std::size_t rows = x.numel() / d;
  const auto& xv = val(x);
  const auto& gv = val(gain);
  const auto& bv = val(bias);
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(rows);
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (in[j] - mu) * inv_std[r];
      out[r * d + j] = gv[j] * xhat[r * d + j] + bv[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain, bias},
                     [x, gain, bias, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                       auto* gx = grad_of(x);
                       auto* gg = grad_of(gain);
                       auto* gb = grad_of(bias);
                       const auto& gv = val(gain);
                       std::vector<double> dxhat(d);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* dy = self.grad.data() + r * d;
                         const double* xh = xhat.data() + r * d;
                         if (gg) simd::kernels().mul_acc(d, dy, xh, gg->data());
                         if (gb) simd::kernels().axpy(d, 1.0, dy, gb->data());
                         if (!gx) continue;
                         double m1 = 0.0, m2 = 0.0;
                         for (std::size_t j = 0; j < d; ++j) {
                           dxhat[j] = dy[j] * gv[j];
                           m1 += dxhat[j];
                           m2 += dxhat[j] * xh[j];
                         }
                         m1 /= static_cast<double>(d);
                         m2 /= static_cast<double>(d);
                         for (std::size_t j = 0; j < d; ++j) {
                           (*gx)[r * d + j] += inv_std[r] * (dxhat[j] - m1 - xh[j] * m2);
                         }
                       }
                     });
}

Tensor apply_mask(const Tensor& a, const std::vector<double>& mask) {
  require_defined(a, "apply_mask");
  if (mask.size() != a.numel()) throw DimensionError("apply_mask: mask size differs from " + shape_str(a.shape()));
  const auto& x = val(a);
  std::vector<double> out(x.size());
  simd::kernels().mul(x.size(), x.data(), mask.data(), out.data());
  return make_result(a.shape(), std::move(out), {a}, [a, mask](Node& self) {
    simd::kernels().mul_acc(mask.size(), self.grad.data(), mask.data(), grad_of(a)->data());
  });
}

Tensor cosine_similarity_rows(const Tensor& a) {
  require_defined(a, "cosine_similarity_rows");
  if (a.rank() != 2) throw DimensionError("cosine_similarity_rows: rank 2 required, got " + shape_str(a.shape()));
  const std::size_t n = a.dim(0), d = a.dim(1);
  const auto& x = val(a);
  const auto& kt = simd::kernels();
  std::vector<double> norm(n);
  std::vector<double> unit(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    norm[i] = std::sqrt(kt.dot(d, x.data() + i * d, x.data() + i * d));
    if (norm[i] > 0) {
      for (std::size_t j = 0; j < d; ++j) unit[i * d + j] = x[i * d + j] / norm[i];
    }
  }
  std::vector<double> out(n * n, 0.0);
  kt.gemm_nt(n, n, d, unit.data(), unit.data(), out.data());
  for (std::size_t i = 0; i < n; ++i) {
    if (norm[i] > 0) out[i * n + i] = 1.0;
  }
  return make_result({n, n}, std::move(out), {a}, [a, n, d, norm, unit](Node& self) {
    auto* g = grad_of(a);
    // c = U Uᵀ  =>  dU = (G + Gᵀ) U, then project out the radial component.
    std::vector<double> sym(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) sym[i * n + j] = self.grad[i * n + j] + self.grad[j * n + i];
    std::vector<double> du(n * d, 0.0);
    simd::kernels().gemm_nn(n, d, n, sym.data(), unit.data(), du.data());
    for (std::size_t i = 0; i < n; ++i) {
      if (norm[i] <= 0) continue;
      const double* u = unit.data() + i * d;
      double* dui = du.data() + i * d;
      const double radial = simd::kernels().dot(d, dui, u);
      for (std::size_t j = 0; j < d; ++j) (*g)[i * d + j] += (dui[j] - radial * u[j]) / norm[i];
    }
  });
}

Tensor mae_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("mae_loss: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  }
  return mean(abs(sub(pred, target)));
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("mse_loss: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  }
  return mean(square(sub(pred, target)));
}

}  // namespace bysgnn::ops
