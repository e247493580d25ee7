#include "spikecast/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "op_support.hpp"
#include "spikecast/profile.hpp"

namespace spikecast {

using detail::constant_result;
using detail::grad_target;
using detail::recorded_result;
using detail::require;
using detail::should_record;

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using MapConstMat = Eigen::Map<const RowMat<T>>;

template <typename T>
void check_same(const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require(a.shape() == b.shape(), op, a.shape(), b.shape());
}

// Generic elementwise unary op. `fwd` maps x -> y, `dydx` maps (x, y) -> dy/dx.
template <typename T, typename Fwd, typename Deriv>
BasicTensor<T> unary(const char* kind, const BasicTensor<T>& x, Fwd fwd, Deriv dydx) {
  const auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  if (!should_record({&x})) return constant_result(x.shape(), std::move(out));
  auto xi = x.impl();
  auto saved = std::make_shared<const std::vector<T>>(out);
  return recorded_result<T>(x.shape(), std::move(out), kind, {x},
                            [xi, saved, dydx](const std::vector<T>& g) {
                              T* gx = grad_target(xi);
                              if (!gx) return;
                              const auto& xv = xi->data;
                              const auto& yv = *saved;
                              for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dydx(xv[i], yv[i]);
                            });
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require(a.rank() >= 1 && b.rank() == 2 && a.shape().back() == b.dim(0), "matmul", a.shape(),
          b.shape());
  const std::size_t k = b.dim(0), n = b.dim(1);
  const std::size_t rows = k ? a.numel() / k : 0;
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<T> out(rows * n, T(0));
  if (rows && n && k) {
    MapMat<T>(out.data(), rows, n).noalias() =
        MapConstMat<T>(a.data().data(), rows, k) * MapConstMat<T>(b.data().data(), k, n);
  }
  record_op("matmul", rows, k, n, static_cast<std::uint64_t>(rows) * k * n, 0);
  if (!should_record({&a, &b})) return constant_result(std::move(out_shape), std::move(out));
  auto ai = a.impl(), bi = b.impl();
  return recorded_result<T>(
      std::move(out_shape), std::move(out), "matmul", {a, b},
      [ai, bi, rows, k, n](const std::vector<T>& g) {
        if (!rows || !k || !n) return;
        MapConstMat<T> gm(g.data(), rows, n);
        if (T* ga = grad_target(ai)) {
          MapMat<T>(ga, rows, k).noalias() += gm * MapConstMat<T>(bi->data.data(), k, n).transpose();
        }
        if (T* gb = grad_target(bi)) {
          MapMat<T>(gb, k, n).noalias() += MapConstMat<T>(ai->data.data(), rows, k).transpose() * gm;
        }
      });
}

template <typename T>
BasicTensor<T> bmm(const BasicTensor<T>& a, const BasicTensor<T>& b, bool transpose_b) {
  require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0), "bmm", a.shape(), b.shape());
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  require((transpose_b ? b.dim(2) : b.dim(1)) == k, "bmm", a.shape(), b.shape());
  std::vector<T> out(batch * m * n, T(0));
  const T* ap = a.data().data();
  const T* bp = b.data().data();
  for (std::size_t s = 0; s < batch && m && n && k; ++s) {
    MapConstMat<T> am(ap + s * m * k, m, k);
    MapMat<T> om(out.data() + s * m * n, m, n);
    if (transpose_b) {
      om.noalias() = am * MapConstMat<T>(bp + s * n * k, n, k).transpose();
    } else {
      om.noalias() = am * MapConstMat<T>(bp + s * k * n, k, n);
    }
  }
  record_op("bmm", batch * m, k, n, static_cast<std::uint64_t>(batch) * m * k * n, 0);
  Shape out_shape{batch, m, n};
  if (!should_record({&a, &b})) return constant_result(std::move(out_shape), std::move(out));
  auto ai = a.impl(), bi = b.impl();
  return recorded_result<T>(
      std::move(out_shape), std::move(out), "bmm", {a, b},
      [ai, bi, batch, m, k, n, transpose_b](const std::vector<T>& g) {
        if (!m || !k || !n) return;
        T* ga = grad_target(ai);
        T* gb = grad_target(bi);
        for (std::size_t s = 0; s < batch; ++s) {
          MapConstMat<T> gm(g.data() + s * m * n, m, n);
          MapConstMat<T> am(ai->data.data() + s * m * k, m, k);
          if (transpose_b) {
            MapConstMat<T> bm(bi->data.data() + s * n * k, n, k);
            if (ga) MapMat<T>(ga + s * m * k, m, k).noalias() += gm * bm;
            if (gb) MapMat<T>(gb + s * n * k, n, k).noalias() += gm.transpose() * am;
          } else {
            MapConstMat<T> bm(bi->data.data() + s * k * n, k, n);
            if (ga) MapMat<T>(ga + s * m * k, m, k).noalias() += gm * bm.transpose();
            if (gb) MapMat<T>(gb + s * k * n, k, n).noalias() += am.transpose() * gm;
          }
        }
      });
}

namespace {

// out = x with axes a0 and a1 exchanged; `accumulate` adds instead of assigns.
template <typename T>
void permute_copy(const T* src, T* dst, const Shape& shape, std::size_t a0, std::size_t a1,
                  bool accumulate) {
  const std::size_t rank = shape.size();
  Shape out_shape = shape;
  std::swap(out_shape[a0], out_shape[a1]);
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * shape[i];
  // Stride in the source for each output axis.
  std::vector<std::size_t> src_stride = in_stride;
  std::swap(src_stride[a0], src_stride[a1]);
  const std::size_t total = shape_numel(shape);
  if (total == 0) return;
  // Innermost run is contiguous in the output.
  const std::size_t inner = out_shape[rank - 1];
  const std::size_t inner_stride = src_stride[rank - 1];
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src_off = 0;
  for (std::size_t o = 0; o < total; o += inner) {
    const T* s = src + src_off;
    T* d = dst + o;
    if (accumulate) {
      for (std::size_t j = 0; j < inner; ++j) d[j] += s[j * inner_stride];
    } else {
      for (std::size_t j = 0; j < inner; ++j) d[j] = s[j * inner_stride];
    }
    for (std::size_t ax = rank - 1; ax-- > 0;) {
      if (++idx[ax] < out_shape[ax]) {
        src_off += src_stride[ax];
        break;
      }
      src_off -= src_stride[ax] * (out_shape[ax] - 1);
      idx[ax] = 0;
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> swap_axes(const BasicTensor<T>& x, std::size_t axis0, std::size_t axis1) {
  if (axis0 >= x.rank() || axis1 >= x.rank()) {
    throw DimensionError("swap_axes: axes " + std::to_string(axis0) + "," +
                         std::to_string(axis1) + " out of range for shape " +
                         shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  std::swap(out_shape[axis0], out_shape[axis1]);
  std::vector<T> out(x.numel());
  if (axis0 == axis1) {
    std::copy(x.data().begin(), x.data().end(), out.begin());
  } else {
    permute_copy(x.data().data(), out.data(), x.shape(), axis0, axis1, false);
  }
  if (!should_record({&x})) return constant_result(std::move(out_shape), std::move(out));
  auto xi = x.impl();
  Shape grad_shape = out_shape;
  return recorded_result<T>(std::move(out_shape), std::move(out), "swap_axes", {x},
                            [xi, grad_shape, axis0, axis1](const std::vector<T>& g) {
                              T* gx = grad_target(xi);
                              if (!gx) return;
                              if (axis0 == axis1) {
                                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                              } else {
                                permute_copy(g.data(), gx, grad_shape, axis0, axis1, true);
                              }
                            });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  require(shape_numel(shape) == x.numel(), "reshape", x.shape(), shape);
  std::vector<T> out(x.data().begin(), x.data().end());
  if (!should_record({&x})) return constant_result(std::move(shape), std::move(out));
  auto xi = x.impl();
  return recorded_result<T>(std::move(shape), std::move(out), "reshape", {x},
                            [xi](const std::vector<T>& g) {
                              if (T* gx = grad_target(xi)) {
                                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                              }
                            });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_same("add", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  if (!should_record({&a, &b})) return constant_result(a.shape(), std::move(out));
  auto ai = a.impl(), bi = b.impl();
  return recorded_result<T>(a.shape(), std::move(out), "add", {a, b},
                            [ai, bi](const std::vector<T>& g) {
                              if (T* ga = grad_target(ai))
                                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                              if (T* gb = grad_target(bi))
                                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                            });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_same("sub", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  if (!should_record({&a, &b})) return constant_result(a.shape(), std::move(out));
  auto ai = a.impl(), bi = b.impl();
  return recorded_result<T>(a.shape(), std::move(out), "sub", {a, b},
                            [ai, bi](const std::vector<T>& g) {
                              if (T* ga = grad_target(ai))
                                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                              if (T* gb = grad_target(bi))
                                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                            });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_same("mul", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  if (!should_record({&a, &b})) return constant_result(a.shape(), std::move(out));
  auto ai = a.impl(), bi = b.impl();
  return recorded_result<T>(a.shape(), std::move(out), "mul", {a, b},
                            [ai, bi](const std::vector<T>& g) {
                              if (T* ga = grad_target(ai))
                                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bi->data[i];
                              if (T* gb = grad_target(bi))
                                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ai->data[i];
                            });
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, T value) {
  return unary<T>("add_scalar", x, [value](T v) { return v + value; }, [](T, T) { return T(1); });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor) {
  return unary<T>("scale", x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias) {
  require(x.rank() >= 1 && bias.rank() == 1 && x.shape().back() == bias.dim(0), "add_bias",
          x.shape(), bias.shape());
  const std::size_t n = bias.dim(0);
  std::vector<T> out(x.data().begin(), x.data().end());
  const auto bv = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % n];
  if (!should_record({&x, &bias})) return constant_result(x.shape(), std::move(out));
  auto xi = x.impl(), bi = bias.impl();
  return recorded_result<T>(x.shape(), std::move(out), "add_bias", {x, bias},
                            [xi, bi, n](const std::vector<T>& g) {
                              if (T* gx = grad_target(xi))
                                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                              if (T* gb = grad_target(bi))
                                for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
                            });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  return unary<T>("sigmoid", x, [](T v) { return stable_sigmoid(v); },
                  [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x) {
  return unary<T>("tanh", x, [](T v) { return std::tanh(v); },
                  [](T, T y) { return T(1) - y * y; });
}

template <typename T>
BasicTensor<T> log(const BasicTensor<T>& x) {
  return unary<T>("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
BasicTensor<T> exp(const BasicTensor<T>& x) {
  return unary<T>("exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& x, T lo, T hi) {
  if (!(lo <= hi)) throw ContractError("clamp: empty range");
  return unary<T>("clamp", x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
                  [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
BasicTensor<T> concat_last(const std::vector<BasicTensor<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_last: no inputs");
  Shape lead = parts[0].shape();
  if (lead.empty()) throw DimensionError("concat_last: scalar input");
  lead.pop_back();
  const std::size_t rows = shape_numel(lead);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    require(!s.empty(), "concat_last", parts[0].shape(), s);
    const std::size_t w = s.back();
    s.pop_back();
    require(s == lead, "concat_last", parts[0].shape(), p.shape());
    widths.push_back(w);
    total += w;
  }
  std::vector<T> out(rows * total);
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto src = parts[p].data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(src.data() + r * widths[p], widths[p], out.data() + r * total + off);
    }
    off += widths[p];
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  if (!should_record(parts)) return constant_result(std::move(out_shape), std::move(out));
  std::vector<std::shared_ptr<detail::TensorImpl<T>>> impls;
  for (const auto& p : parts) impls.push_back(p.impl());
  return recorded_result<T>(std::move(out_shape), std::move(out), "concat_last", parts,
                            [impls, widths, rows, total](const std::vector<T>& g) {
                              std::size_t o = 0;
                              for (std::size_t p = 0; p < impls.size(); ++p) {
                                if (T* gp = grad_target(impls[p])) {
                                  for (std::size_t r = 0; r < rows; ++r)
                                    for (std::size_t j = 0; j < widths[p]; ++j)
                                      gp[r * widths[p] + j] += g[r * total + o + j];
                                }
                                o += widths[p];
                              }
                            });
}

template <typename T>
BasicTensor<T> concat_rows(const std::vector<BasicTensor<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  Shape tail = parts[0].shape();
  if (tail.empty()) throw DimensionError("concat_rows: scalar input");
  tail.erase(tail.begin());
  std::size_t rows = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    require(!s.empty(), "concat_rows", parts[0].shape(), s);
    rows += s[0];
    s.erase(s.begin());
    require(s == tail, "concat_rows", parts[0].shape(), p.shape());
  }
  std::vector<T> out;
  out.reserve(rows * shape_numel(tail));
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    sizes.push_back(p.numel());
  }
  Shape out_shape = tail;
  out_shape.insert(out_shape.begin(), rows);
  if (!should_record(parts)) return constant_result(std::move(out_shape), std::move(out));
  std::vector<std::shared_ptr<detail::TensorImpl<T>>> impls;
  for (const auto& p : parts) impls.push_back(p.impl());
  return recorded_result<T>(std::move(out_shape), std::move(out), "concat_rows", parts,
                            [impls, sizes](const std::vector<T>& g) {
                              std::size_t o = 0;
                              for (std::size_t p = 0; p < impls.size(); ++p) {
                                if (T* gp = grad_target(impls[p]))
                                  for (std::size_t j = 0; j < sizes[p]; ++j) gp[j] += g[o + j];
                                o += sizes[p];
                              }
                            });
}

template <typename T>
BasicTensor<T> slice_last(const BasicTensor<T>& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin > end || end > x.shape().back()) {
    throw DimensionError("slice_last: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for shape " + shape_str(x.shape()));
  }
  const std::size_t width = x.shape().back();
  const std::size_t rows = width ? x.numel() / width : 0;
  const std::size_t w = end - begin;
  std::vector<T> out(rows * w);
  const auto src = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(src.data() + r * width + begin, w, out.data() + r * w);
  }
  Shape out_shape = x.shape();
  out_shape.back() = w;
  if (!should_record({&x})) return constant_result(std::move(out_shape), std::move(out));
  auto xi = x.impl();
  return recorded_result<T>(std::move(out_shape), std::move(out), "slice_last", {x},
                            [xi, rows, width, begin, w](const std::vector<T>& g) {
                              if (T* gx = grad_target(xi))
                                for (std::size_t r = 0; r < rows; ++r)
                                  for (std::size_t j = 0; j < w; ++j)
                                    gx[r * width + begin + j] += g[r * w + j];
                            });
}

template <typename T>
BasicTensor<T> slice_rows(const BasicTensor<T>& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin > end || end > x.dim(0)) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for shape " + shape_str(x.shape()));
  }
  const std::size_t row = x.dim(0) ? x.numel() / x.dim(0) : 0;
  std::vector<T> out(x.data().begin() + begin * row, x.data().begin() + end * row);
  Shape out_shape = x.shape();
  out_shape[0] = end - begin;
  if (!should_record({&x})) return constant_result(std::move(out_shape), std::move(out));
  auto xi = x.impl();
  return recorded_result<T>(std::move(out_shape), std::move(out), "slice_rows", {x},
                            [xi, begin, row](const std::vector<T>& g) {
                              if (T* gx = grad_target(xi)) {
                                T* dst = gx + begin * row;
                                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
                              }
                            });
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x) {
  if (x.rank() == 0) throw DimensionError("softmax: scalar input");
  const std::size_t width = x.shape().back();
  const std::size_t rows = width ? x.numel() / width : 0;
  std::vector<T> out(x.numel());
  const auto src = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = src.data() + r * width;
    T* o = out.data() + r * width;
    const T mx = *std::max_element(in, in + width);
    T total = 0;
    for (std::size_t j = 0; j < width; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < width; ++j) o[j] /= total;
  }
  if (!should_record({&x})) return constant_result(x.shape(), std::move(out));
  auto xi = x.impl();
  auto y = std::make_shared<std::vector<T>>(out);
  return recorded_result<T>(x.shape(), std::move(out), "softmax", {x},
                            [xi, y, rows, width](const std::vector<T>& g) {
                              T* gx = grad_target(xi);
                              if (!gx) return;
                              for (std::size_t r = 0; r < rows; ++r) {
                                const T* yr = y->data() + r * width;
                                const T* gr = g.data() + r * width;
                                T dot = 0;
                                for (std::size_t j = 0; j < width; ++j) dot += gr[j] * yr[j];
                                for (std::size_t j = 0; j < width; ++j)
                                  gx[r * width + j] += yr[j] * (gr[j] - dot);
                              }
                            });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  if (!should_record({&x})) return constant_result(Shape{}, std::vector<T>{total});
  auto xi = x.impl();
  return recorded_result<T>(Shape{}, std::vector<T>{total}, "sum", {x},
                            [xi](const std::vector<T>& g) {
                              if (T* gx = grad_target(xi))
                                for (std::size_t i = 0; i < xi->data.size(); ++i) gx[i] += g[0];
                            });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  if (x.numel() == 0) throw ContractError("mean: empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
BasicTensor<T> gather_rows(const BasicTensor<T>& x, const std::vector<std::uint32_t>& index) {
  if (x.rank() == 0) throw DimensionError("gather_rows: scalar input");
  const std::size_t rows = x.dim(0);
  const std::size_t width = rows ? x.numel() / rows : 0;
  std::vector<T> out(index.size() * width);
  const auto src = x.data();
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= rows) {
      throw ContractError("gather_rows: index " + std::to_string(index[r]) +
                          " out of range for " + std::to_string(rows) + " rows");
    }
    std::copy_n(src.data() + index[r] * width, width, out.data() + r * width);
  }
  Shape out_shape = x.shape();
  out_shape[0] = index.size();
  if (!should_record({&x})) return constant_result(std::move(out_shape), std::move(out));
  auto xi = x.impl();
  return recorded_result<T>(std::move(out_shape), std::move(out), "gather_rows", {x},
                            [xi, index, width](const std::vector<T>& g) {
                              if (T* gx = grad_target(xi))
                                for (std::size_t r = 0; r < index.size(); ++r)
                                  for (std::size_t j = 0; j < width; ++j)
                                    gx[index[r] * width + j] += g[r * width + j];
                            });
}

template <typename T>
BasicTensor<T> index_sum_rows(const BasicTensor<T>& x, const std::vector<std::uint32_t>& offsets,
                              const std::vector<std::uint32_t>& indices) {
  if (x.rank() == 0) throw DimensionError("index_sum_rows: scalar input");
  if (offsets.empty() || offsets.back() != indices.size()) {
    throw ContractError("index_sum_rows: offsets do not cover the index list");
  }
  const std::size_t rows = x.dim(0);
  const std::size_t width = rows ? x.numel() / rows : 0;
  const std::size_t out_rows = offsets.size() - 1;
  std::vector<T> out(out_rows * width, T(0));
  const auto src = x.data();
  for (std::size_t r = 0; r < out_rows; ++r) {
    T* o = out.data() + r * width;
    for (std::uint32_t p = offsets[r]; p < offsets[r + 1]; ++p) {
      if (indices[p] >= rows) {
        throw ContractError("index_sum_rows: index " + std::to_string(indices[p]) +
                            " out of range for " + std::to_string(rows) + " rows");
      }
      const T* s = src.data() + static_cast<std::size_t>(indices[p]) * width;
      for (std::size_t j = 0; j < width; ++j) o[j] += s[j];
    }
  }
  record_op("index_sum_rows", out_rows, indices.size(), width, 0,
            static_cast<std::uint64_t>(indices.size()) * width);
  Shape out_shape = x.shape();
  out_shape[0] = out_rows;
  if (!should_record({&x})) return constant_result(std::move(out_shape), std::move(out));
  auto xi = x.impl();
  return recorded_result<T>(std::move(out_shape), std::move(out), "index_sum_rows", {x},
                            [xi, offsets, indices, width, out_rows](const std::vector<T>& g) {
                              T* gx = grad_target(xi);
                              if (!gx) return;
                              for (std::size_t r = 0; r < out_rows; ++r) {
                                const T* gr = g.data() + r * width;
                                for (std::uint32_t p = offsets[r]; p < offsets[r + 1]; ++p) {
                                  T* d = gx + static_cast<std::size_t>(indices[p]) * width;
                                  for (std::size_t j = 0; j < width; ++j) d[j] += gr[j];
                                }
                              }
                            });
}

template <typename T>
BasicTensor<T> masked_fill(const BasicTensor<T>& x, const std::vector<std::uint8_t>& mask, T value) {
  if (mask.size() != x.numel()) {
    throw DimensionError("masked_fill: mask of " + std::to_string(mask.size()) +
                         " entries for shape " + shape_str(x.shape()));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i]) out[i] = value;
  if (!should_record({&x})) return constant_result(x.shape(), std::move(out));
  auto xi = x.impl();
  return recorded_result<T>(x.shape(), std::move(out), "masked_fill", {x},
                            [xi, mask](const std::vector<T>& g) {
                              if (T* gx = grad_target(xi))
                                for (std::size_t i = 0; i < g.size(); ++i)
                                  if (!mask[i]) gx[i] += g[i];
                            });
}

template <typename T>
BasicTensor<T> repeat_frames(const BasicTensor<T>& x, std::size_t copies) {
  if (x.rank() == 0) throw DimensionError("repeat_frames: scalar input");
  const std::size_t frames = x.dim(0);
  const std::size_t width = frames ? x.numel() / frames : 0;
  std::vector<T> out(frames * copies * width);
  const auto src = x.data();
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t c = 0; c < copies; ++c)
      std::copy_n(src.data() + f * width, width, out.data() + (f * copies + c) * width);
  Shape out_shape = x.shape();
  out_shape.insert(out_shape.begin() + 1, copies);
  if (!should_record({&x})) return constant_result(std::move(out_shape), std::move(out));
  auto xi = x.impl();
  return recorded_result<T>(std::move(out_shape), std::move(out), "repeat_frames", {x},
                            [xi, frames, copies, width](const std::vector<T>& g) {
                              if (T* gx = grad_target(xi))
                                for (std::size_t f = 0; f < frames; ++f)
                                  for (std::size_t c = 0; c < copies; ++c)
                                    for (std::size_t j = 0; j < width; ++j)
                                      gx[f * width + j] += g[(f * copies + c) * width + j];
                            });
}

template <typename T>
BasicTensor<T> mean_groups(const BasicTensor<T>& x, std::size_t group) {
  if (x.rank() == 0 || group == 0 || x.dim(0) % group != 0) {
    throw DimensionError("mean_groups: " + std::to_string(group) +
                         "-row groups do not tile shape " + shape_str(x.shape()));
  }
  const std::size_t rows = x.dim(0);
  const std::size_t width = rows ? x.numel() / rows : 0;
  const std::size_t out_rows = rows / group;
  const T inv = T(1) / static_cast<T>(group);
  std::vector<T> out(out_rows * width, T(0));
  const auto src = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < width; ++j) out[(r / group) * width + j] += src[r * width + j];
  for (auto& v : out) v *= inv;
  Shape out_shape = x.shape();
  out_shape[0] = out_rows;
  if (!should_record({&x})) return constant_result(std::move(out_shape), std::move(out));
  auto xi = x.impl();
  return recorded_result<T>(std::move(out_shape), std::move(out), "mean_groups", {x},
                            [xi, rows, width, group, inv](const std::vector<T>& g) {
                              if (T* gx = grad_target(xi))
                                for (std::size_t r = 0; r < rows; ++r)
                                  for (std::size_t j = 0; j < width; ++j)
                                    gx[r * width + j] += g[(r / group) * width + j] * inv;
                            });
}

#define SPIKECAST_INSTANTIATE_OPS(T)                                                              \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> bmm(const BasicTensor<T>&, const BasicTensor<T>&, bool);                \
  template BasicTensor<T> swap_axes(const BasicTensor<T>&, std::size_t, std::size_t);             \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                  \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> add_scalar(const BasicTensor<T>&, T);                                   \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                        \
  template BasicTensor<T> add_bias(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                         \
  template BasicTensor<T> tanh(const BasicTensor<T>&);                                            \
  template BasicTensor<T> log(const BasicTensor<T>&);                                             \
  template BasicTensor<T> exp(const BasicTensor<T>&);                                             \
  template BasicTensor<T> clamp(const BasicTensor<T>&, T, T);                                     \
  template BasicTensor<T> concat_last(const std::vector<BasicTensor<T>>&);                        \
  template BasicTensor<T> concat_rows(const std::vector<BasicTensor<T>>&);                        \
  template BasicTensor<T> slice_last(const BasicTensor<T>&, std::size_t, std::size_t);            \
  template BasicTensor<T> slice_rows(const BasicTensor<T>&, std::size_t, std::size_t);            \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                         \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                             \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                            \
  template BasicTensor<T> gather_rows(const BasicTensor<T>&, const std::vector<std::uint32_t>&);  \
  template BasicTensor<T> index_sum_rows(const BasicTensor<T>&, const std::vector<std::uint32_t>&, \
                                         const std::vector<std::uint32_t>&);                      \
  template BasicTensor<T> masked_fill(const BasicTensor<T>&, const std::vector<std::uint8_t>&, T); \
  template BasicTensor<T> repeat_frames(const BasicTensor<T>&, std::size_t);                      \
  template BasicTensor<T> mean_groups(const BasicTensor<T>&, std::size_t);

SPIKECAST_INSTANTIATE_OPS(float)
SPIKECAST_INSTANTIATE_OPS(double)

}  // namespace spikecast
