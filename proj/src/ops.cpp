// SPDX-License-Identifier: Apache-2.0
#include "sgn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "sgn/kernels.hpp"

namespace sgn::ops {

namespace {

using kernels::Trans;

std::size_t leading(const Shape& shape, std::size_t keep) {
  std::size_t n = 1;
  for (std::size_t i = 0; i + keep < shape.size(); ++i) n *= shape[i];
  return n;
}

std::string pair_message(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
         shape_string(b);
}

}  // namespace

template <typename Real>
Var<Real> matmul(Var<Real> a, Var<Real> b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw DimensionError(pair_message("matmul", sa, sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor<Real> out(Shape{m, n});
  kernels::gemm(Trans::no, Trans::no, m, n, k, a.value().data().data(),
                b.value().data().data(), out.data().data(), false);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(out), {a, b},
                         [ia, ib, m, n, k](Tape<Real>& t, std::size_t self) {
                           const Real* g = t.grad(self).data();
                           if (t.needs_grad(ia)) {
                             kernels::gemm(Trans::no, Trans::yes, m, k, n, g,
                                           t.value(ib).data().data(), t.grad(ia).data(), true);
                           }
                           if (t.needs_grad(ib)) {
                             kernels::gemm(Trans::yes, Trans::no, k, n, m,
                                           t.value(ia).data().data(), g, t.grad(ib).data(), true);
                           }
                         });
}

template <typename Real>
Var<Real> bmm(Var<Real> a, Var<Real> b, bool transpose_b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.size() < 2 || sb.size() != sa.size() ||
      !std::equal(sa.begin(), sa.end() - 2, sb.begin())) {
    throw DimensionError(pair_message("bmm", sa, sb));
  }
  const std::size_t m = sa[sa.size() - 2], k = sa.back();
  const std::size_t kb = transpose_b ? sb.back() : sb[sb.size() - 2];
  const std::size_t n = transpose_b ? sb[sb.size() - 2] : sb.back();
  if (kb != k) throw DimensionError(pair_message("bmm", sa, sb));
  const std::size_t batch = leading(sa, 2);
  Shape out_shape(sa.begin(), sa.end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor<Real> out(out_shape);
  const Trans tb = transpose_b ? Trans::yes : Trans::no;
  kernels::gemm_batched(Trans::no, tb, batch, m, n, k, a.value().data().data(),
                        b.value().data().data(), out.data().data(), false);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(
      "bmm", std::move(out), {a, b},
      [ia, ib, batch, m, n, k, transpose_b](Tape<Real>& t, std::size_t self) {
        const Real* g = t.grad(self).data();
        const Real* av = t.value(ia).data().data();
        const Real* bv = t.value(ib).data().data();
        if (t.needs_grad(ia)) {
          // dA = dC·op(B)ᵀ
          kernels::gemm_batched(Trans::no, transpose_b ? Trans::no : Trans::yes, batch, m, k,
                                n, g, bv, t.grad(ia).data(), true);
        }
        if (t.needs_grad(ib)) {
          if (transpose_b) {
            // B is [n×k]: dB = dCᵀ·A
            kernels::gemm_batched(Trans::yes, Trans::no, batch, n, k, m, g, av,
                                  t.grad(ib).data(), true);
          } else {
            kernels::gemm_batched(Trans::yes, Trans::no, batch, k, n, m, av, g,
                                  t.grad(ib).data(), true);
          }
        }
      });
}

template <typename Real>
Var<Real> affine(Var<Real> x, Var<Real> weight, std::optional<Var<Real>> bias) {
  const Shape sx = x.shape();
  const Shape sw = weight.shape();
  if (sx.empty() || sw.size() != 2 || sw[1] != sx.back()) {
    throw DimensionError(pair_message("affine", sx, sw));
  }
  const std::size_t d_out = sw[0], d_in = sw[1];
  if (bias && (bias->shape().size() != 1 || bias->shape()[0] != d_out)) {
    throw DimensionError(pair_message("affine bias", sw, bias->shape()));
  }
  const std::size_t rows = leading(sx, 1);
  Shape out_shape = sx;
  out_shape.back() = d_out;
  Tensor<Real> out(out_shape);
  Real* y = out.data().data();
  kernels::gemm(Trans::no, Trans::yes, rows, d_out, d_in, x.value().data().data(),
                weight.value().data().data(), y, false);
  if (bias) {
    const Real* bv = bias->value().data().data();
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < d_out; ++j) y[r * d_out + j] += bv[j];
    }
  }
  const std::size_t ix = x.id(), iw = weight.id();
  const bool has_bias = bias.has_value();
  const std::size_t ib = has_bias ? bias->id() : 0;
  auto backward = [ix, iw, ib, has_bias, rows, d_in, d_out](Tape<Real>& t, std::size_t self) {
    const Real* g = t.grad(self).data();
    if (t.needs_grad(ix)) {
      kernels::gemm(Trans::no, Trans::no, rows, d_in, d_out, g, t.value(iw).data().data(),
                    t.grad(ix).data(), true);
    }
    if (t.needs_grad(iw)) {
      kernels::gemm(Trans::yes, Trans::no, d_out, d_in, rows, g, t.value(ix).data().data(),
                    t.grad(iw).data(), true);
    }
    if (has_bias && t.needs_grad(ib)) {
      Real* db = t.grad(ib).data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d_out; ++j) db[j] += g[r * d_out + j];
      }
    }
  };
  if (has_bias) {
    return x.tape().record("affine", std::move(out), {x, weight, *bias}, std::move(backward));
  }
  return x.tape().record("affine", std::move(out), {x, weight}, std::move(backward));
}

template <typename Real>
Var<Real> relu(Var<Real> x) {
  const Tensor<Real>& xv = x.value();
  Tensor<Real> out(xv.shape());
  const std::size_t n = xv.size();
  const Real* src = xv.data().data();
  Real* dst = out.data().data();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] > Real(0) ? src[i] : Real(0);
  const std::size_t ix = x.id();
  return x.tape().record("relu", std::move(out), {x}, [ix, n](Tape<Real>& t, std::size_t self) {
    const Real* g = t.grad(self).data();
    const Real* y = t.value(self).data().data();
    Real* dx = t.grad(ix).data();
    // Gradient at exactly zero is zero.
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < n; ++i) dx[i] += y[i] > Real(0) ? g[i] : Real(0);
  });
}

template <typename Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  if (a.shape() != b.shape()) throw DimensionError(pair_message("add", a.shape(), b.shape()));
  Tensor<Real> out(a.shape());
  const std::size_t n = out.size();
  const Real* av = a.value().data().data();
  const Real* bv = b.value().data().data();
  Real* dst = out.data().data();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) dst[i] = av[i] + bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("add", std::move(out), {a, b}, [ia, ib, n](Tape<Real>& t, std::size_t self) {
    const Real* g = t.grad(self).data();
    for (std::size_t id : {ia, ib}) {
      if (!t.needs_grad(id)) continue;
      Real* d = t.grad(id).data();
#pragma omp parallel for simd schedule(static)
      for (std::size_t i = 0; i < n; ++i) d[i] += g[i];
    }
  });
}

template <typename Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  if (a.shape() != b.shape()) throw DimensionError(pair_message("mul", a.shape(), b.shape()));
  Tensor<Real> out(a.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = a.value()[i] * b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("mul", std::move(out), {a, b}, [ia, ib, n](Tape<Real>& t, std::size_t self) {
    const Real* g = t.grad(self).data();
    if (t.needs_grad(ia)) {
      Real* d = t.grad(ia).data();
      const Real* bv = t.value(ib).data().data();
      for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * bv[i];
    }
    if (t.needs_grad(ib)) {
      Real* d = t.grad(ib).data();
      const Real* av = t.value(ia).data().data();
      for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * av[i];
    }
  });
}

template <typename Real>
Var<Real> scale(Var<Real> x, Real factor) {
  Tensor<Real> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * factor;
  const std::size_t ix = x.id();
  return x.tape().record("scale", std::move(out), {x}, [ix, factor](Tape<Real>& t, std::size_t self) {
    auto g = t.grad(self);
    auto d = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * factor;
  });
}

template <typename Real>
Var<Real> sum(Var<Real> x) {
  Real total = 0;
  for (Real v : x.value().data()) total += v;
  const std::size_t ix = x.id();
  return x.tape().record("sum", Tensor<Real>::scalar(total), {x},
                         [ix](Tape<Real>& t, std::size_t self) {
                           const Real g = t.grad(self)[0];
                           for (Real& d : t.grad(ix)) d += g;
                         });
}

template <typename Real>
Var<Real> mean(Var<Real> x) {
  const Real inv = Real(1) / static_cast<Real>(x.value().size());
  return scale(sum(x), inv);
}

template <typename Real>
Var<Real> reshape(Var<Real> x, Shape shape) {
  Tensor<Real> out = x.value().reshaped(std::move(shape));
  const std::size_t ix = x.id();
  return x.tape().record("reshape", std::move(out), {x}, [ix](Tape<Real>& t, std::size_t self) {
    auto g = t.grad(self);
    auto d = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

template <typename Real>
Var<Real> expand(Var<Real> x, Shape shape) {
  const Shape src = x.shape();
  if (src.size() > shape.size()) throw DimensionError(pair_message("expand", src, shape));
  // Strides of x aligned to the target rank; broadcast axes get stride 0.
  const std::size_t rank = shape.size();
  std::vector<std::size_t> strides(rank, 0);
  {
    std::size_t stride = 1;
    for (std::size_t i = 0; i < src.size(); ++i) {
      const std::size_t s_axis = src.size() - 1 - i;
      const std::size_t d_axis = rank - 1 - i;
      if (src[s_axis] != shape[d_axis] && src[s_axis] != 1) {
        throw DimensionError(pair_message("expand", src, shape));
      }
      strides[d_axis] = src[s_axis] == 1 ? 0 : stride;
      stride *= src[s_axis];
    }
  }
  Tensor<Real> out(shape);
  // Innermost run that is contiguous in both source and target.
  const std::size_t inner = shape.back();
  const std::size_t rows = out.size() / inner;
  std::vector<std::size_t> offsets(rows);
  {
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t off = 0;
      for (std::size_t a = 0; a + 1 < rank; ++a) off += idx[a] * strides[a];
      offsets[r] = off;
      for (std::size_t a = rank - 1; a-- > 0;) {
        if (++idx[a] < shape[a]) break;
        idx[a] = 0;
      }
    }
  }
  const std::size_t inner_stride = strides[rank - 1];
  const Real* sv = x.value().data().data();
  Real* dst = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < inner; ++c) dst[r * inner + c] = sv[offsets[r] + c * inner_stride];
  }
  const std::size_t ix = x.id();
  return x.tape().record("expand", std::move(out), {x},
                         [ix, offsets = std::move(offsets), inner, inner_stride](Tape<Real>& t,
                                                                                std::size_t self) {
                           const Real* g = t.grad(self).data();
                           Real* d = t.grad(ix).data();
                           for (std::size_t r = 0; r < offsets.size(); ++r) {
                             for (std::size_t c = 0; c < inner; ++c) {
                               d[offsets[r] + c * inner_stride] += g[r * inner + c];
                             }
                           }
                         });
}

template <typename Real>
Var<Real> concat_last(Var<Real> a, Var<Real> b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.empty() || sa.size() != sb.size() || !std::equal(sa.begin(), sa.end() - 1, sb.begin())) {
    throw DimensionError(pair_message("concat", sa, sb));
  }
  const std::size_t da = sa.back(), db = sb.back(), rows = leading(sa, 1);
  Shape shape = sa;
  shape.back() = da + db;
  Tensor<Real> out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().data().data() + r * da, da, out.data().data() + r * (da + db));
    std::copy_n(b.value().data().data() + r * db, db, out.data().data() + r * (da + db) + da);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("concat", std::move(out), {a, b},
                         [ia, ib, da, db, rows](Tape<Real>& t, std::size_t self) {
                           const Real* g = t.grad(self).data();
                           if (t.needs_grad(ia)) {
                             Real* d = t.grad(ia).data();
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < da; ++c) d[r * da + c] += g[r * (da + db) + c];
                             }
                           }
                           if (t.needs_grad(ib)) {
                             Real* d = t.grad(ib).data();
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < db; ++c) {
                                 d[r * db + c] += g[r * (da + db) + da + c];
                               }
                             }
                           }
                         });
}

template <typename Real>
Var<Real> softmax_rows(Var<Real> x) {
  const Shape sx = x.shape();
  if (sx.empty()) throw DimensionError("softmax_rows: rank-0 input");
  const std::size_t n = sx.back(), rows = leading(sx, 1);
  Tensor<Real> out(sx);
  kernels::softmax_rows(x.value().data().data(), rows, n, out.data().data());
  const std::size_t ix = x.id();
  return x.tape().record("softmax", std::move(out), {x}, [ix, n, rows](Tape<Real>& t, std::size_t self) {
    const Real* g = t.grad(self).data();
    const Real* y = t.value(self).data().data();
    Real* d = t.grad(ix).data();
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < rows; ++r) {
      Real dot = 0;
      for (std::size_t i = 0; i < n; ++i) dot += g[r * n + i] * y[r * n + i];
      for (std::size_t i = 0; i < n; ++i) d[r * n + i] += y[r * n + i] * (g[r * n + i] - dot);
    }
  });
}

template <typename Real>
Var<Real> batch_norm(Var<Real> x, Var<Real> gamma, Var<Real> beta, BatchNormState<Real> state,
                     std::size_t channel_axis, bool training) {
  const Shape sx = x.shape();
  if (channel_axis >= sx.size()) {
    throw DimensionError("batch_norm: channel axis " + std::to_string(channel_axis) +
                         " out of range for " + shape_string(sx));
  }
  const std::size_t channels = sx[channel_axis];
  for (const Var<Real>* p : {&gamma, &beta}) {
    if (p->shape() != Shape{channels}) {
      throw DimensionError(pair_message("batch_norm", sx, p->shape()));
    }
  }
  if (!state.running_mean || !state.running_var ||
      state.running_mean->shape() != Shape{channels} ||
      state.running_var->shape() != Shape{channels}) {
    throw DimensionError("batch_norm: running statistics do not match " + std::to_string(channels) +
                         " channels");
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < channel_axis; ++i) outer *= sx[i];
  for (std::size_t i = channel_axis + 1; i < sx.size(); ++i) inner *= sx[i];
  const std::size_t count = outer * inner;
  const Real* xv = x.value().data().data();
  auto at = [=](std::size_t o, std::size_t c, std::size_t i) { return (o * channels + c) * inner + i; };

  std::vector<Real> mean_c(channels), inv_std(channels);
  if (training) {
    std::vector<double> s1(channels, 0.0), s2(channels, 0.0);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < inner; ++i) s1[c] += xv[at(o, c, i)];
      }
    }
    for (std::size_t c = 0; c < channels; ++c) s1[c] /= static_cast<double>(count);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < inner; ++i) {
          const double dv = xv[at(o, c, i)] - s1[c];
          s2[c] += dv * dv;
        }
      }
    }
    Real* rm = state.running_mean->data().data();
    Real* rv = state.running_var->data().data();
    for (std::size_t c = 0; c < channels; ++c) {
      const double var = s2[c] / static_cast<double>(count);
      const double unbiased = count > 1 ? s2[c] / static_cast<double>(count - 1) : var;
      mean_c[c] = static_cast<Real>(s1[c]);
      inv_std[c] = static_cast<Real>(1.0 / std::sqrt(var + state.eps));
      rm[c] = static_cast<Real>((1.0 - state.momentum) * rm[c] + state.momentum * s1[c]);
      rv[c] = static_cast<Real>((1.0 - state.momentum) * rv[c] + state.momentum * unbiased);
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean_c[c] = (*state.running_mean)[c];
      inv_std[c] = static_cast<Real>(1.0 / std::sqrt(static_cast<double>((*state.running_var)[c]) + state.eps));
    }
  }

  Tensor<Real> xhat(sx);
  Tensor<Real> out(sx);
  const Real* gv = gamma.value().data().data();
  const Real* bv = beta.value().data().data();
  Real* xh = xhat.data().data();
  Real* y = out.data().data();
#pragma omp parallel for schedule(static)
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t k = at(o, c, i);
        xh[k] = (xv[k] - mean_c[c]) * inv_std[c];
        y[k] = gv[c] * xh[k] + bv[c];
      }
    }
  }

  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape().record(
      "batch_norm", std::move(out), {x, gamma, beta},
      [ix, ig, ib, outer, channels, inner, count, training, at, inv_std = std::move(inv_std),
       xhat = std::move(xhat)](Tape<Real>& t, std::size_t self) {
        const Real* g = t.grad(self).data();
        const Real* xh = xhat.data().data();
        std::vector<double> sum_g(channels, 0.0), sum_gx(channels, 0.0);
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t k = at(o, c, i);
              sum_g[c] += g[k];
              sum_gx[c] += static_cast<double>(g[k]) * xh[k];
            }
          }
        }
        const Real* gv = t.value(ig).data().data();
        if (t.needs_grad(ig)) {
          Real* d = t.grad(ig).data();
          for (std::size_t c = 0; c < channels; ++c) d[c] += static_cast<Real>(sum_gx[c]);
        }
        if (t.needs_grad(ib)) {
          Real* d = t.grad(ib).data();
          for (std::size_t c = 0; c < channels; ++c) d[c] += static_cast<Real>(sum_g[c]);
        }
        if (!t.needs_grad(ix)) return;
        Real* dx = t.grad(ix).data();
        const double inv_n = 1.0 / static_cast<double>(count);
#pragma omp parallel for schedule(static)
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t c = 0; c < channels; ++c) {
            const double scale_c = static_cast<double>(gv[c]) * inv_std[c];
            const double mg = sum_g[c] * inv_n;
            const double mgx = sum_gx[c] * inv_n;
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t k = at(o, c, i);
              if (training) {
                dx[k] += static_cast<Real>(scale_c * (g[k] - mg - xh[k] * mgx));
              } else {
                dx[k] += static_cast<Real>(scale_c * g[k]);
              }
            }
          }
        }
      });
}

template <typename Real>
Var<Real> conv1d_temporal(Var<Real> x, Var<Real> kernel, std::optional<Var<Real>> bias) {
  const Shape sx = x.shape();
  const Shape sk = kernel.shape();
  if (sk.size() != 3) throw DimensionError("conv1d: kernel must be [C_out×C_in×k], got " + shape_string(sk));
  const std::size_t c_out = sk[0], c_in = sk[1], width = sk[2];
  if (width % 2 == 0) {
    throw ConfigError("conv1d: kernel size must be odd, got " + std::to_string(width));
  }
  if ((sx.size() != 3 && sx.size() != 4) || sx.back() != c_in) {
    throw DimensionError(pair_message("conv1d", sx, sk));
  }
  if (bias && bias->shape() != Shape{c_out}) {
    throw DimensionError(pair_message("conv1d bias", sk, bias->shape()));
  }
  const std::size_t outer = sx[0], frames = sx[1];
  const std::size_t sites = sx.size() == 4 ? sx[2] : 1;
  const std::size_t rows = outer * frames * sites;
  const std::size_t cols = c_in * width;
  // k = 1 needs no unfolding: x already is the column matrix.
  std::vector<Real> columns;
  if (width > 1) {
    columns.resize(rows * cols);
    kernels::im2col_temporal(x.value().data().data(), outer, frames, sites, c_in, width,
                             columns.data());
  }
  const Real* col_ptr = width > 1 ? columns.data() : x.value().data().data();
  Shape out_shape = sx;
  out_shape.back() = c_out;
  Tensor<Real> out(out_shape);
  Real* y = out.data().data();
  kernels::gemm(Trans::no, Trans::yes, rows, c_out, cols, col_ptr, kernel.value().data().data(), y,
                false);
  if (bias) {
    const Real* bv = bias->value().data().data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < c_out; ++j) y[r * c_out + j] += bv[j];
    }
  }
  const std::size_t ix = x.id(), ik = kernel.id();
  const bool has_bias = bias.has_value();
  const std::size_t ib = has_bias ? bias->id() : 0;
  auto backward = [ix, ik, ib, has_bias, outer, frames, sites, c_in, c_out, width, rows, cols,
                   columns = std::move(columns)](Tape<Real>& t, std::size_t self) {
    const Real* g = t.grad(self).data();
    if (t.needs_grad(ik)) {
      const Real* col_ptr = width > 1 ? columns.data() : t.value(ix).data().data();
      kernels::gemm(Trans::yes, Trans::no, c_out, cols, rows, g, col_ptr, t.grad(ik).data(), true);
    }
    if (has_bias && t.needs_grad(ib)) {
      Real* db = t.grad(ib).data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < c_out; ++j) db[j] += g[r * c_out + j];
      }
    }
    if (t.needs_grad(ix)) {
      if (width == 1) {
        kernels::gemm(Trans::no, Trans::no, rows, cols, c_out, g, t.value(ik).data().data(),
                      t.grad(ix).data(), true);
      } else {
        std::vector<Real> dcol(rows * cols);
        kernels::gemm(Trans::no, Trans::no, rows, cols, c_out, g, t.value(ik).data().data(),
                      dcol.data(), false);
        kernels::col2im_temporal(dcol.data(), outer, frames, sites, c_in, width,
                                 t.grad(ix).data());
      }
    }
  };
  if (has_bias) {
    return x.tape().record("conv1d", std::move(out), {x, kernel, *bias}, std::move(backward));
  }
  return x.tape().record("conv1d", std::move(out), {x, kernel}, std::move(backward));
}

template <typename Real>
PoolResult<Real> pool_axis(Var<Real> x, std::size_t axis, PoolMode mode) {
  const Shape sx = x.shape();
  if (axis >= sx.size()) {
    throw DimensionError("pool: axis " + std::to_string(axis) + " out of range for " +
                         shape_string(sx));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= sx[i];
  for (std::size_t i = axis + 1; i < sx.size(); ++i) inner *= sx[i];
  const std::size_t n = sx[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < sx.size(); ++i) {
    if (i != axis) out_shape.push_back(sx[i]);
  }
  Tensor<Real> out(out_shape);
  PoolResult<Real> result;
  const std::size_t ix = x.id();
  if (mode == PoolMode::max) {
    result.argmax.resize(outer * inner);
    kernels::pool_max(x.value().data().data(), outer, n, inner, out.data().data(),
                      result.argmax.data());
    result.output = x.tape().record(
        "max_pool", std::move(out), {x},
        [ix, outer, n, inner, argmax = result.argmax](Tape<Real>& t, std::size_t self) {
          const Real* g = t.grad(self).data();
          Real* d = t.grad(ix).data();
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t c = 0; c < inner; ++c) {
              d[(o * n + argmax[o * inner + c]) * inner + c] += g[o * inner + c];
            }
          }
        });
  } else {
    kernels::pool_avg(x.value().data().data(), outer, n, inner, out.data().data());
    result.output = x.tape().record(
        "avg_pool", std::move(out), {x}, [ix, outer, n, inner](Tape<Real>& t, std::size_t self) {
          const Real* g = t.grad(self).data();
          Real* d = t.grad(ix).data();
          const Real w = Real(1) / static_cast<Real>(n);
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < n; ++i) {
              for (std::size_t c = 0; c < inner; ++c) d[(o * n + i) * inner + c] += g[o * inner + c] * w;
            }
          }
        });
  }
  return result;
}

#define SGN_INSTANTIATE_OPS(Real)                                                              \
  template Var<Real> matmul<Real>(Var<Real>, Var<Real>);                                       \
  template Var<Real> bmm<Real>(Var<Real>, Var<Real>, bool);                                    \
  template Var<Real> affine<Real>(Var<Real>, Var<Real>, std::optional<Var<Real>>);             \
  template Var<Real> relu<Real>(Var<Real>);                                                    \
  template Var<Real> add<Real>(Var<Real>, Var<Real>);                                          \
  template Var<Real> mul<Real>(Var<Real>, Var<Real>);                                          \
  template Var<Real> scale<Real>(Var<Real>, Real);                                             \
  template Var<Real> sum<Real>(Var<Real>);                                                     \
  template Var<Real> mean<Real>(Var<Real>);                                                    \
  template Var<Real> reshape<Real>(Var<Real>, Shape);                                          \
  template Var<Real> expand<Real>(Var<Real>, Shape);                                           \
  template Var<Real> concat_last<Real>(Var<Real>, Var<Real>);                                  \
  template Var<Real> softmax_rows<Real>(Var<Real>);                                            \
  template Var<Real> batch_norm<Real>(Var<Real>, Var<Real>, Var<Real>, BatchNormState<Real>,   \
                                      std::size_t, bool);                                      \
  template Var<Real> conv1d_temporal<Real>(Var<Real>, Var<Real>, std::optional<Var<Real>>);    \
  template PoolResult<Real> pool_axis<Real>(Var<Real>, std::size_t, PoolMode);

SGN_INSTANTIATE_OPS(float)
SGN_INSTANTIATE_OPS(double)

#undef SGN_INSTANTIATE_OPS

}  // namespace sgn::ops
