#pragma once

// Differentiable operations over BasicGraph. Every op validates shapes up
// front (ShapeError naming the node it would create), computes its forward
// value eagerly, and registers a closure that propagates gradients to the
// inputs that require them.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "omnilab/numcore/graph.hpp"

namespace omnilab::num {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <class T>
Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> array_map(std::span<const T> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}
template <class T>
Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> array_map(std::span<T> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}

inline bool is_suffix(const Shape& big, const Shape& small) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

template <class T>
void check_same_graph(BasicVar<T> a, BasicVar<T> b) {
  if (a.graph != b.graph || a.graph == nullptr) {
    throw std::invalid_argument("operands belong to different graphs");
  }
}

enum class Binary { add, sub, mul };

template <class T>
BasicVar<T> binary(BasicVar<T> a, BasicVar<T> b, Binary kind) {
  check_same_graph(a, b);
  auto& g = *a.graph;
  const char* op = kind == Binary::add ? "add" : kind == Binary::sub ? "sub" : "mul";
  const auto& av = a.value();
  const auto& bv = b.value();
  if (!is_suffix(av.shape(), bv.shape())) {
    throw ShapeError(g.next_name(op), "cannot broadcast " +
                                          shape_str(bv.shape()) + " onto " +
                                          shape_str(av.shape()));
  }
  const std::int64_t inner = bv.size();
  const std::int64_t outer = av.size() / inner;
  BasicTensor<T> out(av.shape());
  const T* pa = av.ptr();
  const T* pb = bv.ptr();
  T* po = out.ptr();
  for (std::int64_t o = 0; o < outer; ++o) {
    const T* ra = pa + o * inner;
    T* ro = po + o * inner;
    switch (kind) {
      case Binary::add:
        for (std::int64_t i = 0; i < inner; ++i) ro[i] = ra[i] + pb[i];
        break;
      case Binary::sub:
        for (std::int64_t i = 0; i < inner; ++i) ro[i] = ra[i] - pb[i];
        break;
      case Binary::mul:
        for (std::int64_t i = 0; i < inner; ++i) ro[i] = ra[i] * pb[i];
        break;
    }
  }
  const int ia = a.id, ib = b.id;
  return g.record(op, {ia, ib}, std::move(out),
                  [ia, ib, kind, inner, outer](BasicGraph<T>& gr, int self) {
                    const T* dy = gr.grad_of(self).ptr();
                    if (gr.requires_grad(ia)) {
                      T* da = gr.accum_grad(ia).ptr();
                      if (kind == Binary::mul) {
                        const T* pb = gr.value_of(ib).ptr();
                        for (std::int64_t o = 0; o < outer; ++o)
                          for (std::int64_t i = 0; i < inner; ++i)
                            da[o * inner + i] += dy[o * inner + i] * pb[i];
                      } else {
                        for (std::int64_t i = 0; i < outer * inner; ++i) da[i] += dy[i];
                      }
                    }
                    if (gr.requires_grad(ib)) {
                      T* db = gr.accum_grad(ib).ptr();
                      const T* pa = gr.value_of(ia).ptr();
                      for (std::int64_t o = 0; o < outer; ++o) {
                        for (std::int64_t i = 0; i < inner; ++i) {
                          const T d = dy[o * inner + i];
                          if (kind == Binary::add) db[i] += d;
                          else if (kind == Binary::sub) db[i] -= d;
                          else db[i] += d * pa[o * inner + i];
                        }
                      }
                    }
                  });
}

/// Splits a shape [..., M, K] into (batch, M, K) for matmul purposes.
struct MatDims {
  std::int64_t batch, rows, cols;
};

inline MatDims mat_dims(const Shape& s) {
  const auto r = s.size();
  std::int64_t batch = 1;
  for (std::size_t i = 0; i + 2 < r; ++i) batch *= s[i];
  return {batch, s[r - 2], s[r - 1]};
}

}  // namespace detail

template <class T>
BasicVar<T> operator+(BasicVar<T> a, BasicVar<T> b) {
  return detail::binary(a, b, detail::Binary::add);
}
template <class T>
BasicVar<T> operator-(BasicVar<T> a, BasicVar<T> b) {
  return detail::binary(a, b, detail::Binary::sub);
}
/// Elementwise product; `b` may broadcast over the leading axes of `a`.
template <class T>
BasicVar<T> operator*(BasicVar<T> a, BasicVar<T> b) {
  return detail::binary(a, b, detail::Binary::mul);
}

template <class T>
BasicVar<T> scale(BasicVar<T> a, T s) {
  auto& g = *a.graph;
  BasicTensor<T> out = a.value();
  for (auto& v : out.data()) v *= s;
  const int ia = a.id;
  return g.record("scale", {ia}, std::move(out),
                  [ia, s](BasicGraph<T>& gr, int self) {
                    const auto dy = gr.grad_of(self).data();
                    auto da = gr.accum_grad(ia).data();
                    for (std::size_t i = 0; i < da.size(); ++i) da[i] += s * dy[i];
                  });
}

/// a @ b. `a` is [..., M, K]. `b` is either [K, N] (shared across the
/// leading axes of `a`) or [B, K, N] matching a's flattened batch B.
/// With `transpose_b`, `b` is read as [..., N, K] instead.
template <class T>
BasicVar<T> matmul(BasicVar<T> a, BasicVar<T> b, bool transpose_b = false) {
  using namespace detail;
  check_same_graph(a, b);
  auto& g = *a.graph;
  const char* op = transpose_b ? "matmul_nt" : "matmul";
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() < 2 || bv.rank() < 2) {
    throw ShapeError(g.next_name(op), "operands must have rank >= 2");
  }
  const MatDims da = mat_dims(av.shape());
  const MatDims db = mat_dims(bv.shape());
  const bool shared_b = bv.rank() == 2;
  const std::int64_t K = da.cols;
  const std::int64_t bk = transpose_b ? db.cols : db.rows;
  const std::int64_t N = transpose_b ? db.rows : db.cols;
  if (bk != K || (!shared_b && db.batch != da.batch)) {
    throw ShapeError(g.next_name(op), "incompatible shapes " +
                                          shape_str(av.shape()) + " and " +
                                          shape_str(bv.shape()));
  }
  Shape out_shape = av.shape();
  out_shape.back() = N;
  BasicTensor<T> out(out_shape);
  if (shared_b) {
    CMapMat<T> A(av.ptr(), da.batch * da.rows, K);
    MapMat<T> C(out.ptr(), da.batch * da.rows, N);
    if (transpose_b) {
      C.noalias() = A * CMapMat<T>(bv.ptr(), N, K).transpose();
    } else {
      C.noalias() = A * CMapMat<T>(bv.ptr(), K, N);
    }
  } else {
    for (std::int64_t bi = 0; bi < da.batch; ++bi) {
      CMapMat<T> A(av.ptr() + bi * da.rows * K, da.rows, K);
      MapMat<T> C(out.ptr() + bi * da.rows * N, da.rows, N);
      if (transpose_b) {
        C.noalias() = A * CMapMat<T>(bv.ptr() + bi * N * K, N, K).transpose();
      } else {
        C.noalias() = A * CMapMat<T>(bv.ptr() + bi * K * N, K, N);
      }
    }
  }
  const int ia = a.id, ib = b.id;
  const std::int64_t M = da.rows, B = da.batch;
  return g.record(
      op, {ia, ib}, std::move(out),
      [=](BasicGraph<T>& gr, int self) {
        const T* dy = gr.grad_of(self).ptr();
        const T* pa = gr.value_of(ia).ptr();
        const T* pb = gr.value_of(ib).ptr();
        const std::int64_t steps = shared_b ? 1 : B;
        const std::int64_t rows = shared_b ? B * M : M;
        for (std::int64_t bi = 0; bi < steps; ++bi) {
          CMapMat<T> dC(dy + bi * rows * N, rows, N);
          CMapMat<T> A(pa + bi * rows * K, rows, K);
          const T* pbb = pb + (shared_b ? 0 : bi * K * N);
          if (gr.requires_grad(ia)) {
            MapMat<T> dA(gr.accum_grad(ia).ptr() + bi * rows * K, rows, K);
            if (transpose_b) dA.noalias() += dC * CMapMat<T>(pbb, N, K);
            else dA.noalias() += dC * CMapMat<T>(pbb, K, N).transpose();
          }
          if (gr.requires_grad(ib)) {
            T* pdb = gr.accum_grad(ib).ptr() + (shared_b ? 0 : bi * K * N);
            if (transpose_b) {
              MapMat<T>(pdb, N, K).noalias() += dC.transpose() * A;
            } else {
              MapMat<T>(pdb, K, N).noalias() += A.transpose() * dC;
            }
          }
        }
      });
}

template <class T>
BasicVar<T> reshape(BasicVar<T> a, Shape shape) {
  auto& g = *a.graph;
  if (shape_numel(shape) != a.value().size()) {
    throw ShapeError(g.next_name("reshape"),
                     "cannot reshape " + shape_str(a.shape()) + " to " +
                         shape_str(shape));
  }
  const int ia = a.id;
  return g.record("reshape", {ia}, a.value().reshaped(std::move(shape)),
                  [ia](BasicGraph<T>& gr, int self) {
                    const auto dy = gr.grad_of(self).data();
                    auto da = gr.accum_grad(ia).data();
                    for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i];
                  });
}

namespace detail {

/// out[perm-indexed] = in; `inverse` scatters instead of gathers.
template <class T>
void permute_copy(const T* in, T* out, const Shape& in_shape,
                  const std::vector<int>& perm, bool accumulate_back) {
  const std::size_t r = in_shape.size();
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = in_shape[static_cast<std::size_t>(perm[i])];
  std::vector<std::int64_t> in_stride(r, 1);
  for (std::size_t i = r - 1; i > 0; --i) in_stride[i - 1] = in_stride[i] * in_shape[i];
  // Inner contiguous run when the last axis is kept in place.
  const bool inner_run = perm[r - 1] == static_cast<int>(r - 1);
  const std::int64_t run = inner_run ? in_shape[r - 1] : 1;
  const std::size_t loop_rank = inner_run ? r - 1 : r;
  const std::int64_t total = shape_numel(out_shape) / run;
  std::vector<std::int64_t> idx(loop_rank, 0);
  for (std::int64_t o = 0; o < total; ++o) {
    std::int64_t src = 0;
    for (std::size_t k = 0; k < loop_rank; ++k) {
      src += idx[k] * in_stride[static_cast<std::size_t>(perm[k])];
    }
    T* dst = out + o * run;
    if (accumulate_back) {
      // `out` holds the output-gradient, `in` the input-gradient buffer.
      T* back = const_cast<T*>(in) + src;
      for (std::int64_t i = 0; i < run; ++i) back[i] += dst[i];
    } else {
      const T* s = in + src;
      for (std::int64_t i = 0; i < run; ++i) dst[i] = s[i];
    }
    for (std::size_t k = loop_rank; k-- > 0;) {
      if (++idx[k] < out_shape[k]) break;
      idx[k] = 0;
    }
  }
}

}  // namespace detail

/// Reorders axes: output axis i is input axis perm[i].
template <class T>
BasicVar<T> permute(BasicVar<T> a, std::vector<int> perm) {
  auto& g = *a.graph;
  const Shape& s = a.shape();
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> iota(s.size());
  std::iota(iota.begin(), iota.end(), 0);
  if (sorted != iota) {
    throw ShapeError(g.next_name("permute"),
                     "invalid axis permutation for shape " + shape_str(s));
  }
  Shape out_shape(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out_shape[i] = s[static_cast<std::size_t>(perm[i])];
  BasicTensor<T> out(out_shape);
  detail::permute_copy(a.value().ptr(), out.ptr(), s, perm, false);
  const int ia = a.id;
  return g.record("permute", {ia}, std::move(out),
                  [ia, perm, s](BasicGraph<T>& gr, int self) {
                    auto& da = gr.accum_grad(ia);
                    detail::permute_copy(
                        da.ptr(), const_cast<T*>(gr.grad_of(self).ptr()), s,
                        perm, true);
                  });
}

/// Swaps the last two axes.
template <class T>
BasicVar<T> transpose(BasicVar<T> a) {
  const int r = a.value().rank();
  if (r < 2) {
    throw ShapeError(a.graph->next_name("transpose"), "rank must be >= 2");
  }
  std::vector<int> perm(static_cast<std::size_t>(r));
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[static_cast<std::size_t>(r - 1)], perm[static_cast<std::size_t>(r - 2)]);
  return permute(a, perm);
}

/// Softmax over the last axis.
template <class T>
BasicVar<T> softmax(BasicVar<T> a) {
  auto& g = *a.graph;
  const auto& av = a.value();
  const std::int64_t n = av.dim(-1);
  const std::int64_t rows = av.size() / n;
  BasicTensor<T> out(av.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> x(av.ptr() + r * n, n);
    Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> y(out.ptr() + r * n, n);
    y = (x - x.maxCoeff()).exp();
    y *= T(1) / y.sum();
  }
  const int ia = a.id;
  return g.record("softmax", {ia}, std::move(out),
                  [ia, n, rows](BasicGraph<T>& gr, int self) {
                    const T* y = gr.value_of(self).ptr();
                    const T* dy = gr.grad_of(self).ptr();
                    T* dx = gr.accum_grad(ia).ptr();
                    for (std::int64_t r = 0; r < rows; ++r) {
                      const T* yr = y + r * n;
                      const T* gr_ = dy + r * n;
                      T dot = 0;
                      for (std::int64_t i = 0; i < n; ++i) dot += yr[i] * gr_[i];
                      T* xr = dx + r * n;
                      for (std::int64_t i = 0; i < n; ++i) xr[i] += yr[i] * (gr_[i] - dot);
                    }
                  });
}

/// x / sqrt(mean(x^2) + eps) over the last axis.
template <class T>
BasicVar<T> rms_norm(BasicVar<T> a, T eps = T(1e-6)) {
  auto& g = *a.graph;
  const auto& av = a.value();
  const std::int64_t n = av.dim(-1);
  const std::int64_t rows = av.size() / n;
  BasicTensor<T> out(av.shape());
  auto inv_rms = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* x = av.ptr() + r * n;
    T ss = 0;
    for (std::int64_t i = 0; i < n; ++i) ss += x[i] * x[i];
    const T inv = T(1) / std::sqrt(ss / T(n) + eps);
    (*inv_rms)[static_cast<std::size_t>(r)] = inv;
    T* y = out.ptr() + r * n;
    for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] * inv;
  }
  const int ia = a.id;
  return g.record("rms_norm", {ia}, std::move(out),
                  [ia, n, rows, inv_rms](BasicGraph<T>& gr, int self) {
                    const T* y = gr.value_of(self).ptr();
                    const T* dy = gr.grad_of(self).ptr();
                    T* dx = gr.accum_grad(ia).ptr();
                    for (std::int64_t r = 0; r < rows; ++r) {
                      const T* yr = y + r * n;
                      const T* gr_ = dy + r * n;
                      T dot = 0;
                      for (std::int64_t i = 0; i < n; ++i) dot += yr[i] * gr_[i];
                      dot /= T(n);
                      const T inv = (*inv_rms)[static_cast<std::size_t>(r)];
                      T* xr = dx + r * n;
                      for (std::int64_t i = 0; i < n; ++i) xr[i] += inv * (gr_[i] - yr[i] * dot);
                    }
                  });
}

template <class T>
BasicVar<T> silu(BasicVar<T> a) {
  auto& g = *a.graph;
  BasicTensor<T> out(a.shape());
  const auto x = a.value().data();
  auto y = out.data();
  detail::array_map<T>(y) = detail::array_map<T>(x) / (T(1) + (-detail::array_map<T>(x)).exp());
  const int ia = a.id;
  return g.record("silu", {ia}, std::move(out),
                  [ia](BasicGraph<T>& gr, int self) {
                    const auto x = gr.value_of(ia).data();
                    const auto dy = gr.grad_of(self).data();
                    auto dx = gr.accum_grad(ia).data();
                    const auto xa = detail::array_map<T>(x);
                    const auto sig = (T(1) / (T(1) + (-xa).exp())).eval();
                    detail::array_map<T>(dx) +=
                        detail::array_map<T>(dy) * sig * (T(1) + xa * (T(1) - sig));
                  });
}

/// GELU, tanh approximation.
template <class T>
BasicVar<T> gelu(BasicVar<T> a) {
  constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T k = T(0.044715);
  auto& g = *a.graph;
  BasicTensor<T> out(a.shape());
  const auto x = a.value().data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T u = c * (x[i] + k * x[i] * x[i] * x[i]);
    y[i] = T(0.5) * x[i] * (T(1) + std::tanh(u));
  }
  const int ia = a.id;
  return g.record("gelu", {ia}, std::move(out),
                  [ia](BasicGraph<T>& gr, int self) {
                    const auto x = gr.value_of(ia).data();
                    const auto dy = gr.grad_of(self).data();
                    auto dx = gr.accum_grad(ia).data();
                    for (std::size_t i = 0; i < x.size(); ++i) {
                      const T v = x[i];
                      const T u = c * (v + k * v * v * v);
                      const T th = std::tanh(u);
                      const T du = c * (T(1) + T(3) * k * v * v);
                      dx[i] += dy[i] * (T(0.5) * (T(1) + th) +
                                        T(0.5) * v * (T(1) - th * th) * du);
                    }
                  });
}

/// Mean of squared differences over all elements; returns shape [1].
template <class T>
BasicVar<T> mse(BasicVar<T> pred, BasicVar<T> target) {
  detail::check_same_graph(pred, target);
  auto& g = *pred.graph;
  const auto& p = pred.value();
  const auto& t = target.value();
  if (p.shape() != t.shape()) {
    throw ShapeError(g.next_name("mse"), "prediction " + shape_str(p.shape()) +
                                             " vs target " + shape_str(t.shape()));
  }
  double acc = 0;
  for (std::int64_t i = 0; i < p.size(); ++i) {
    const double d = double(p[i]) - double(t[i]);
    acc += d * d;
  }
  const std::int64_t n = p.size();
  const int ip = pred.id, it = target.id;
  return g.record("mse", {ip, it}, BasicTensor<T>::scalar(T(acc / double(n))),
                  [ip, it, n](BasicGraph<T>& gr, int self) {
                    const T s = gr.grad_of(self)[0] * T(2) / T(n);
                    const auto pv = gr.value_of(ip).data();
                    const auto tv = gr.value_of(it).data();
                    if (gr.requires_grad(ip)) {
                      auto d = gr.accum_grad(ip).data();
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * (pv[i] - tv[i]);
                    }
                    if (gr.requires_grad(it)) {
                      auto d = gr.accum_grad(it).data();
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= s * (pv[i] - tv[i]);
                    }
                  });
}

/// Sum of all elements; returns shape [1].
template <class T>
BasicVar<T> sum(BasicVar<T> a) {
  auto& g = *a.graph;
  double acc = 0;
  for (T v : a.value().data()) acc += double(v);
  const int ia = a.id;
  return g.record("sum", {ia}, BasicTensor<T>::scalar(T(acc)),
                  [ia](BasicGraph<T>& gr, int self) {
                    const T d = gr.grad_of(self)[0];
                    for (auto& v : gr.accum_grad(ia).data()) v += d;
                  });
}

/// Rows of `table` ([V, D]) selected by `indices`; returns [n, D].
template <class T>
BasicVar<T> embedding(BasicVar<T> table, std::vector<std::int64_t> indices) {
  auto& g = *table.graph;
  const auto& tv = table.value();
  if (tv.rank() != 2) {
    throw ShapeError(g.next_name("embedding"), "table must be rank 2");
  }
  if (indices.empty()) {
    throw ShapeError(g.next_name("embedding"), "empty index list");
  }
  const std::int64_t V = tv.dim(0), D = tv.dim(1);
  for (auto ix : indices) {
    if (ix < 0 || ix >= V) {
      throw ShapeError(g.next_name("embedding"),
                       "index " + std::to_string(ix) + " outside table of " +
                           std::to_string(V) + " rows");
    }
  }
  const auto n = static_cast<std::int64_t>(indices.size());
  BasicTensor<T> out(Shape{n, D});
  for (std::int64_t r = 0; r < n; ++r) {
    std::copy_n(tv.ptr() + indices[static_cast<std::size_t>(r)] * D, D, out.ptr() + r * D);
  }
  const int it = table.id;
  return g.record("embedding", {it}, std::move(out),
                  [it, D, idx = std::move(indices)](BasicGraph<T>& gr, int self) {
                    const T* dy = gr.grad_of(self).ptr();
                    T* dt = gr.accum_grad(it).ptr();
                    for (std::size_t r = 0; r < idx.size(); ++r) {
                      T* row = dt + idx[r] * D;
                      const T* src = dy + static_cast<std::int64_t>(r) * D;
                      for (std::int64_t j = 0; j < D; ++j) row[j] += src[j];
                    }
                  });
}

/// Concatenation along axis 0 (the token axis).
template <class T>
BasicVar<T> concat_rows(const std::vector<BasicVar<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no operands");
  auto& g = *parts.front().graph;
  const Shape& first = parts.front().shape();
  Shape tail(first.begin() + 1, first.end());
  std::int64_t rows = 0;
  for (const auto& p : parts) {
    detail::check_same_graph(parts.front(), p);
    const Shape& s = p.shape();
    if (Shape(s.begin() + 1, s.end()) != tail) {
      throw ShapeError(g.next_name("concat"), "trailing shape " + shape_str(s) +
                                                  " differs from " + shape_str(first));
    }
    rows += s[0];
  }
  Shape out_shape = first;
  out_shape[0] = rows;
  BasicTensor<T> out(out_shape);
  std::vector<int> ids;
  std::vector<std::int64_t> offsets;
  std::int64_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.ptr() + off);
    ids.push_back(p.id);
    offsets.push_back(off);
    off += p.value().size();
  }
  auto in_ids = ids;
  return g.record("concat", std::move(in_ids), std::move(out),
                  [ids, offsets](BasicGraph<T>& gr, int self) {
                    const T* dy = gr.grad_of(self).ptr();
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (!gr.requires_grad(ids[k])) continue;
                      auto d = gr.accum_grad(ids[k]).data();
                      const T* src = dy + offsets[k];
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += src[i];
                    }
                  });
}

/// Rows [begin, end) along axis 0.
template <class T>
BasicVar<T> slice_rows(BasicVar<T> a, std::int64_t begin, std::int64_t end) {
  auto& g = *a.graph;
  const Shape& s = a.shape();
  if (begin < 0 || end > s[0] || begin >= end) {
    throw ShapeError(g.next_name("slice"),
                     "row range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " + shape_str(s));
  }
  const std::int64_t row = a.value().size() / s[0];
  Shape out_shape = s;
  out_shape[0] = end - begin;
  BasicTensor<T> out(out_shape);
  std::copy_n(a.value().ptr() + begin * row, (end - begin) * row, out.ptr());
  const int ia = a.id;
  return g.record("slice", {ia}, std::move(out),
                  [ia, begin, row](BasicGraph<T>& gr, int self) {
                    const auto dy = gr.grad_of(self).data();
                    T* d = gr.accum_grad(ia).ptr() + begin * row;
                    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
                  });
}

/// Pairwise rotation of the last axis. `x` is [..., T, D]; `cos`/`sin`
/// are [T, D/2] and rotate channel pair (2i, 2i+1) of token t by the angle
/// whose cosine/sine are cos[t, i]/sin[t, i].
template <class T>
BasicVar<T> rotate_pairs(BasicVar<T> x,
                         std::shared_ptr<const BasicTensor<T>> cos,
                         std::shared_ptr<const BasicTensor<T>> sin) {
  auto& g = *x.graph;
  const auto& xv = x.value();
  if (xv.rank() < 2 || xv.dim(-1) % 2 != 0 || cos->rank() != 2 ||
      cos->shape() != sin->shape() || cos->dim(0) != xv.dim(-2) ||
      cos->dim(1) * 2 != xv.dim(-1)) {
    throw ShapeError(g.next_name("rotate_pairs"),
                     "input " + shape_str(xv.shape()) + " vs tables " +
                         shape_str(cos->shape()));
  }
  const std::int64_t tokens = xv.dim(-2), half = xv.dim(-1) / 2;
  const std::int64_t batch = xv.size() / (tokens * half * 2);
  auto rotate = [=](const T* in, T* out, T sign, bool acc) {
    for (std::int64_t b = 0; b < batch; ++b) {
      for (std::int64_t t = 0; t < tokens; ++t) {
        const T* c = cos->ptr() + t * half;
        const T* s = sin->ptr() + t * half;
        const T* xi = in + (b * tokens + t) * half * 2;
        T* yo = out + (b * tokens + t) * half * 2;
        for (std::int64_t i = 0; i < half; ++i) {
          const T x0 = xi[2 * i], x1 = xi[2 * i + 1];
          const T y0 = x0 * c[i] - sign * x1 * s[i];
          const T y1 = sign * x0 * s[i] + x1 * c[i];
          if (acc) {
            yo[2 * i] += y0;
            yo[2 * i + 1] += y1;
          } else {
            yo[2 * i] = y0;
            yo[2 * i + 1] = y1;
          }
        }
      }
    }
  };
  BasicTensor<T> out(xv.shape());
  rotate(xv.ptr(), out.ptr(), T(1), false);
  const int ix = x.id;
  return g.record("rotate_pairs", {ix}, std::move(out),
                  [ix, rotate](BasicGraph<T>& gr, int self) {
                    rotate(gr.grad_of(self).ptr(), gr.accum_grad(ix).ptr(), T(-1), true);
                  });
}

}  // namespace omnilab::num
