#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Core>

#include "common/error.hpp"
#include "numerics/autograd.hpp"

namespace clinbench::numerics {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap cmap(const double* p, std::size_t r, std::size_t c) {
  return ConstMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MutMap mmap(double* p, std::size_t r, std::size_t c) {
  return MutMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void same_tape(const Var& a, const Var& b) {
  require(&a.tape() == &b.tape(), ErrorKind::Contract, "operands live on different tapes");
}

void same_shape(const Var& a, const Var& b, const char* op) {
  require(a.shape() == b.shape(), ErrorKind::Dimension,
          std::string(op) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
}

/// Splits a shape around `axis` into (outer, n, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  require(axis < shape.size(), ErrorKind::Dimension,
          "axis " + std::to_string(axis) + " out of range for shape " + to_string(shape));
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <class F, class D>
Var unary(const Var& x, F&& forward, D&& derivative) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = forward(xv[i]);
  return x.tape().record(std::move(out), {x},
                         [x, derivative](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
                           const Tensor& xv = x.value();
                           Tensor& dx = *gi[0];
                           for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * derivative(xv[i]);
                         });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(0), ErrorKind::Dimension,
          "matmul: cannot multiply " + to_string(av.shape()) + " by " + to_string(bv.shape()));
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  mmap(out.data().data(), m, n).noalias() = cmap(av.data().data(), m, k) * cmap(bv.data().data(), k, n);
  return a.tape().record(std::move(out), {a, b}, [a, b, m, k, n](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    const auto gm = cmap(g.data().data(), m, n);
    if (gi[0]) mmap(gi[0]->data().data(), m, k).noalias() += gm * cmap(b.value().data().data(), k, n).transpose();
    if (gi[1]) mmap(gi[1]->data().data(), k, n).noalias() += cmap(a.value().data().data(), m, k).transpose() * gm;
  });
}

Var bmm(const Var& a, const Var& b, bool ta, bool tb) {
  same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() == 3 && bv.rank() == 3 && av.dim(0) == bv.dim(0), ErrorKind::Dimension,
          "bmm: incompatible batches " + to_string(av.shape()) + " and " + to_string(bv.shape()));
  const std::size_t batch = av.dim(0);
  const std::size_t ar = av.dim(1), ac = av.dim(2), br = bv.dim(1), bc = bv.dim(2);
  const std::size_t m = ta ? ac : ar, k = ta ? ar : ac;
  const std::size_t k2 = tb ? bc : br, n = tb ? br : bc;
  require(k == k2, ErrorKind::Dimension,
          "bmm: inner dimensions differ for " + to_string(av.shape()) + " and " + to_string(bv.shape()));
  Tensor out({batch, m, n});
  for (std::size_t s = 0; s < batch; ++s) {
    const auto A = cmap(av.data().data() + s * ar * ac, ar, ac);
    const auto B = cmap(bv.data().data() + s * br * bc, br, bc);
    auto C = mmap(out.data().data() + s * m * n, m, n);
    if (!ta && !tb) C.noalias() = A * B;
    else if (!ta && tb) C.noalias() = A * B.transpose();
    else if (ta && !tb) C.noalias() = A.transpose() * B;
    else C.noalias() = A.transpose() * B.transpose();
  }
  return a.tape().record(
      std::move(out), {a, b}, [a, b, ta, tb, batch, ar, ac, br, bc, m, n](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        for (std::size_t s = 0; s < batch; ++s) {
          const auto A = cmap(av.data().data() + s * ar * ac, ar, ac);
          const auto B = cmap(bv.data().data() + s * br * bc, br, bc);
          const auto G = cmap(g.data().data() + s * m * n, m, n);
          if (gi[0]) {
            auto dA = mmap(gi[0]->data().data() + s * ar * ac, ar, ac);
            if (!ta && !tb) dA.noalias() += G * B.transpose();
            else if (!ta && tb) dA.noalias() += G * B;
            else if (ta && !tb) dA.noalias() += B * G.transpose();
            else dA.noalias() += B.transpose() * G.transpose();
          }
          if (gi[1]) {
            auto dB = mmap(gi[1]->data().data() + s * br * bc, br, bc);
            if (!ta && !tb) dB.noalias() += A.transpose() * G;
            else if (!ta && tb) dB.noalias() += G.transpose() * A;
            else if (ta && !tb) dB.noalias() += A * G;
            else dB.noalias() += G.transpose() * A.transpose();
          }
        }
      });
}

Var affine(const Var& x, const Var& w, const Var& b) {
  same_tape(x, w);
  same_tape(x, b);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  require(xv.rank() == 2 && wv.rank() == 2 && xv.dim(1) == wv.dim(0), ErrorKind::Dimension,
          "affine: cannot multiply " + to_string(xv.shape()) + " by " + to_string(wv.shape()));
  require(bv.rank() == 1 && bv.dim(0) == wv.dim(1), ErrorKind::Dimension,
          "affine: bias " + to_string(bv.shape()) + " does not match weight " + to_string(wv.shape()));
  const std::size_t m = xv.dim(0), k = xv.dim(1), n = wv.dim(1);
  Tensor out({m, n});
  auto O = mmap(out.data().data(), m, n);
  O.noalias() = cmap(xv.data().data(), m, k) * cmap(wv.data().data(), k, n);
  O.rowwise() += cmap(bv.data().data(), 1, n).row(0);
  return x.tape().record(std::move(out), {x, w, b}, [x, w, m, k, n](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    const auto G = cmap(g.data().data(), m, n);
    if (gi[0]) mmap(gi[0]->data().data(), m, k).noalias() += G * cmap(w.value().data().data(), k, n).transpose();
    if (gi[1]) mmap(gi[1]->data().data(), k, n).noalias() += cmap(x.value().data().data(), m, k).transpose() * G;
    if (gi[2]) mmap(gi[2]->data().data(), 1, n) += G.colwise().sum();
  });
}

Var add(const Var& a, const Var& b) {
  same_tape(a, b);
  same_shape(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return a.tape().record(std::move(out), {a, b}, [](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    for (Tensor* d : gi) {
      if (!d) continue;
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  same_tape(a, b);
  same_shape(a, b, "sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return a.tape().record(std::move(out), {a, b}, [](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    if (gi[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
    if (gi[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i];
  });
}

Var mul(const Var& a, const Var& b) {
  same_tape(a, b);
  same_shape(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (gi[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * bv[i];
    if (gi[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * av[i];
  });
}

Var scale(const Var& a, double factor) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return a.tape().record(std::move(out), {a}, [factor](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * factor;
  });
}

Var add_bias(const Var& x, const Var& bias) {
  same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require(xv.rank() >= 1 && bv.rank() == 1 && xv.shape().back() == bv.dim(0), ErrorKind::Dimension,
          "add_bias: bias " + to_string(bv.shape()) + " does not match " + to_string(xv.shape()));
  const std::size_t n = bv.dim(0), rows = xv.size() / n;
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = xv[r * n + j] + bv[j];
  return x.tape().record(std::move(out), {x, bias}, [n, rows](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    if (gi[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
    if (gi[1])
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) (*gi[1])[j] += g[r * n + j];
  });
}

Var relu(const Var& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var gelu(const Var& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt_2pi](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        return cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

Var exp(const Var& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Var log(const Var& x) {
  for (double v : x.value().data())
    require(v > 0.0, ErrorKind::Numeric, "log of non-positive value " + std::to_string(v));
  return unary(x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Var sigmoid(const Var& x) {
  auto sig = [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); };
  return unary(x, sig, [sig](double v) {
    const double s = sig(v);
    return s * (1.0 - s);
  });
}

Var reshape(const Var& x, Shape shape) {
  const Tensor& xv = x.value();
  Tensor out = xv.reshaped(std::move(shape));
  return x.tape().record(std::move(out), {x}, [](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
  });
}

namespace {

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> st(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) st[i - 1] = st[i] * shape[i];
  return st;
}

/// For each output position, the flat index of the source element.
std::vector<std::size_t> permutation_map(const Shape& in_shape, const std::vector<std::size_t>& axes) {
  const std::size_t rank = in_shape.size();
  const auto in_strides = strides_of(in_shape);
  Shape out_shape(rank);
  std::vector<std::size_t> step(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = in_shape[axes[i]];
    step[i] = in_strides[axes[i]];
  }
  std::vector<std::size_t> map(shape_size(in_shape));
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t o = 0; o < map.size(); ++o) {
    map[o] = src;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out_shape[d]) {
        src += step[d];
        break;
      }
      src -= step[d] * (out_shape[d] - 1);
      idx[d] = 0;
    }
  }
  return map;
}

}  // namespace

Var permute(const Var& x, const std::vector<std::size_t>& axes) {
  const Tensor& xv = x.value();
  const std::size_t rank = xv.rank();
  require(axes.size() == rank, ErrorKind::Dimension, "permute: axis count does not match rank");
  std::vector<bool> seen(rank, false);
  for (std::size_t a : axes) {
    require(a < rank && !seen[a], ErrorKind::Dimension, "permute: axes are not a permutation");
    seen[a] = true;
  }
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = xv.dim(axes[i]);
  auto map = permutation_map(xv.shape(), axes);
  Tensor out(out_shape);
  for (std::size_t o = 0; o < map.size(); ++o) out[o] = xv[map[o]];
  return x.tape().record(std::move(out), {x}, [map = std::move(map)](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    Tensor& dx = *gi[0];
    for (std::size_t o = 0; o < map.size(); ++o) dx[map[o]] += g[o];
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  require(!parts.empty(), ErrorKind::Contract, "concat of zero tensors");
  const Shape& first = parts.front().shape();
  Shape out_shape = first;
  std::vector<std::size_t> widths;
  out_shape.at(axis) = 0;
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    require(ok, ErrorKind::Dimension, "concat: " + to_string(s) + " incompatible with " + to_string(first));
    const AxisSplit sp = split_axis(s, axis);
    widths.push_back(sp.n * sp.inner);
    out_shape[axis] += s[axis];
  }
  const AxisSplit osp = split_axis(out_shape, axis);
  const std::size_t row = osp.n * osp.inner;
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& pv = parts[p].value();
    for (std::size_t o = 0; o < osp.outer; ++o)
      std::copy_n(pv.data().begin() + o * widths[p], widths[p], out.data().begin() + o * row + offset);
    offset += widths[p];
  }
  return parts.front().tape().record(
      std::move(out), parts, [widths, row, outer = osp.outer](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < gi.size(); ++p) {
          if (gi[p]) {
            for (std::size_t o = 0; o < outer; ++o)
              for (std::size_t j = 0; j < widths[p]; ++j) (*gi[p])[o * widths[p] + j] += g[o * row + offset + j];
          }
          offset += widths[p];
        }
      });
}

Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  const AxisSplit sp = split_axis(xv.shape(), axis);
  require(begin < end && end <= sp.n, ErrorKind::Index,
          "slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range for axis of size " +
              std::to_string(sp.n));
  Shape out_shape = xv.shape();
  out_shape[axis] = end - begin;
  const std::size_t width = (end - begin) * sp.inner, row = sp.n * sp.inner, off = begin * sp.inner;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(xv.data().begin() + o * row + off, width, out.data().begin() + o * width);
  return x.tape().record(std::move(out), {x},
                         [width, row, off, outer = sp.outer](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
                           for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t j = 0; j < width; ++j) (*gi[0])[o * row + off + j] += g[o * width + j];
                         });
}

Var tile_leading(const Var& x, std::size_t times) {
  const Tensor& xv = x.value();
  require(xv.rank() >= 1 && xv.dim(0) == 1 && times > 0, ErrorKind::Dimension,
          "tile_leading needs a leading dimension of 1, got " + to_string(xv.shape()));
  Shape out_shape = xv.shape();
  out_shape[0] = times;
  const std::size_t block = xv.size();
  Tensor out(out_shape);
  for (std::size_t t = 0; t < times; ++t) std::copy_n(xv.data().begin(), block, out.data().begin() + t * block);
  return x.tape().record(std::move(out), {x}, [block, times](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    for (std::size_t t = 0; t < times; ++t)
      for (std::size_t j = 0; j < block; ++j) (*gi[0])[j] += g[t * block + j];
  });
}

Var sum(const Var& x) {
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.data()) s += v;
  return x.tape().record(Tensor::scalar(s), {x}, [](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    const double gv = g[0];
    for (double& d : gi[0]->data()) d += gv;
  });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var mean_axis(const Var& x, std::size_t axis) {
  const Tensor& xv = x.value();
  const AxisSplit sp = split_axis(xv.shape(), axis);
  Shape out_shape = xv.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape);
  const double inv = 1.0 / static_cast<double>(sp.n);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t k = 0; k < sp.n; ++k)
      for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += xv[(o * sp.n + k) * sp.inner + i] * inv;
  return x.tape().record(std::move(out), {x}, [sp, inv](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t k = 0; k < sp.n; ++k)
        for (std::size_t i = 0; i < sp.inner; ++i) (*gi[0])[(o * sp.n + k) * sp.inner + i] += g[o * sp.inner + i] * inv;
  });
}

Var softmax(const Var& x, std::size_t axis) {
  const Tensor& xv = x.value();
  const AxisSplit sp = split_axis(xv.shape(), axis);
  for (double v : xv.data()) require(std::isfinite(v), ErrorKind::Numeric, "softmax of non-finite input");
  Tensor out(xv.shape());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.n * sp.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < sp.n; ++k) mx = std::max(mx, xv[base + k * sp.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < sp.n; ++k) {
        const double e = std::exp(xv[base + k * sp.inner] - mx);
        out[base + k * sp.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < sp.n; ++k) out[base + k * sp.inner] /= z;
    }
  }
  return x.tape().record(std::move(out), {x}, [sp](const Tensor& g, const Tensor& yv, std::span<Tensor* const> gi) {
    Tensor& dx = *gi[0];
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.n * sp.inner + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < sp.n; ++k) dot += g[base + k * sp.inner] * yv[base + k * sp.inner];
        for (std::size_t k = 0; k < sp.n; ++k) {
          const std::size_t j = base + k * sp.inner;
          dx[j] += yv[j] * (g[j] - dot);
        }
      }
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  same_tape(x, gain);
  same_tape(x, bias);
  const Tensor& xv = x.value();
  require(xv.rank() >= 1, ErrorKind::Dimension, "layer_norm of a scalar");
  const std::size_t d = xv.shape().back();
  require(gain.shape() == Shape{d} && bias.shape() == Shape{d}, ErrorKind::Dimension,
          "layer_norm: gain/bias must have shape [" + std::to_string(d) + "]");
  require(eps >= 0.0, ErrorKind::Contract, "layer_norm eps must be nonnegative");
  require(d >= 2 || eps > 0.0, ErrorKind::Contract, "layer_norm over a single feature needs eps > 0");
  const std::size_t rows = xv.size() / d;
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  std::vector<double> xhat(xv.size()), rstd(rows);
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double denom = var + eps;
    rstd[r] = denom > 0.0 ? 1.0 / std::sqrt(denom) : 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mu) * rstd[r];
      out[r * d + j] = xhat[r * d + j] * gv[j] + bv[j];
    }
  }
  return x.tape().record(
      std::move(out), {x, gain, bias},
      [gain, d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
        const Tensor& gv = gain.value();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = g.data().data() + r * d;
          const double* xh = xhat.data() + r * d;
          if (gi[1])
            for (std::size_t j = 0; j < d; ++j) (*gi[1])[j] += gr[j] * xh[j];
          if (gi[2])
            for (std::size_t j = 0; j < d; ++j) (*gi[2])[j] += gr[j];
          if (gi[0]) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dxh = gr[j] * gv[j];
              m1 += dxh;
              m2 += dxh * xh[j];
            }
            m1 /= static_cast<double>(d);
            m2 /= static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j)
              (*gi[0])[r * d + j] += rstd[r] * (gr[j] * gv[j] - m1 - xh[j] * m2);
          }
        }
      });
}

Var dropout(const Var& x, double p, Mode mode, CounterRng& rng) {
  require(p >= 0.0 && p < 1.0, ErrorKind::InvalidProbability,
          "dropout probability must be in [0, 1), got " + std::to_string(p));
  if (mode == Mode::Eval || p == 0.0) return x;
  const Tensor& xv = x.value();
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(xv.size());
  const std::uint64_t base = rng.counter();
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = CounterRng::to_unit(rng.at(base + i)) < p ? 0.0 : keep_scale;
  rng.skip(mask.size());
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return x.tape().record(std::move(out), {x},
                         [mask = std::move(mask)](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * mask[i];
                         });
}

Var embedding_lookup(const Var& table, std::span<const std::int64_t> ids) {
  const Tensor& tv = table.value();
  require(tv.rank() == 2, ErrorKind::Dimension, "embedding table must be 2-D, got " + to_string(tv.shape()));
  require(!ids.empty(), ErrorKind::Contract, "embedding_lookup with no ids");
  const std::size_t v = tv.dim(0), d = tv.dim(1);
  for (std::int64_t id : ids)
    require(id >= 0 && static_cast<std::size_t>(id) < v, ErrorKind::Index,
            "embedding id " + std::to_string(id) + " out of range for table with " + std::to_string(v) + " rows");
  std::vector<std::int64_t> idv(ids.begin(), ids.end());
  Tensor out({idv.size(), d});
  for (std::size_t r = 0; r < idv.size(); ++r)
    std::copy_n(tv.data().begin() + static_cast<std::size_t>(idv[r]) * d, d, out.data().begin() + r * d);
  return table.tape().record(std::move(out), {table}, [idv = std::move(idv), d](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
    for (std::size_t r = 0; r < idv.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) (*gi[0])[static_cast<std::size_t>(idv[r]) * d + j] += g[r * d + j];
  });
}

}  // namespace clinbench::numerics
