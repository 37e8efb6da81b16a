// Copyright 2026 The LGTSM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lgtsm/ops.hpp"
#include "lgtsm/tape.hpp"

namespace lgtsm::ops {

namespace {

template <typename F, typename D>
Tensor unary_op(const char* name, const Tensor& x, F f, D df) {
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto xs = x.data<T>();
    auto os = out.data<T>();
    for (std::size_t i = 0; i < xs.size(); ++i) os[i] = f(xs[i]);
  });
  check_finite(out, name);
  Tape::record(name, {x}, out, [x, out, df](const Tensor& g, std::span<Tensor> gi) {
    dispatch(x.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto xs = x.data<T>();
      auto ys = out.data<T>();
      auto gs = g.data<T>();
      auto dx = gi[0].data<T>();
      for (std::size_t i = 0; i < xs.size(); ++i) dx[i] += gs[i] * df(xs[i], ys[i]);
    });
  });
  return out;
}

void require_rank5(const Tensor& x, const char* op) {
  if (x.rank() != 5) {
    throw ShapeError(std::string(op) + ": expected [B,C,L,H,W], got " + shape_str(x.shape()));
  }
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      "sigmoid", x,
      [](auto v) {
        using T = decltype(v);
        T y;
        if (v >= T(0)) {
          y = T(1) / (T(1) + std::exp(-v));
        } else {
          const T e = std::exp(v);
          y = e / (T(1) + e);
        }
        // Keep the gate strictly inside (0,1) even where exp under/overflows.
        return std::clamp(y, std::numeric_limits<T>::min(),
                          T(1) - std::numeric_limits<T>::epsilon() / T(2));
      },
      [](auto, auto y) { return y * (decltype(y)(1) - y); });
}

Tensor tanh(const Tensor& x) {
  return unary_op(
      "tanh", x, [](auto v) { return std::tanh(v); },
      [](auto, auto y) { return decltype(y)(1) - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      "relu", x, [](auto v) { return v > decltype(v)(0) ? v : decltype(v)(0); },
      [](auto v, auto) { return v > decltype(v)(0) ? decltype(v)(1) : decltype(v)(0); });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary_op(
      "leaky_relu", x,
      [slope](auto v) {
        using T = decltype(v);
        return v > T(0) ? v : static_cast<T>(slope) * v;
      },
      [slope](auto v, auto) {
        using T = decltype(v);
        return v > T(0) ? T(1) : static_cast<T>(slope);
      });
}

Tensor abs(const Tensor& x) {
  return unary_op(
      "abs", x, [](auto v) { return std::abs(v); },
      [](auto v, auto) {
        using T = decltype(v);
        return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
      });
}

Tensor scale(const Tensor& x, double factor) {
  return unary_op(
      "scale", x, [factor](auto v) { return static_cast<decltype(v)>(factor) * v; },
      [factor](auto v, auto) { return static_cast<decltype(v)>(factor); });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary_op(
      "add_scalar", x, [value](auto v) { return v + static_cast<decltype(v)>(value); },
      [](auto v, auto) { return decltype(v)(1); });
}

namespace {

enum class BinaryKind { add, sub, mul };

Tensor binary_op(const char* name, BinaryKind kind, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, name);
  check_same_dtype(a, b, name);
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto as = a.data<T>();
    auto bs = b.data<T>();
    auto os = out.data<T>();
    for (std::size_t i = 0; i < os.size(); ++i) {
      switch (kind) {
        case BinaryKind::add: os[i] = as[i] + bs[i]; break;
        case BinaryKind::sub: os[i] = as[i] - bs[i]; break;
        case BinaryKind::mul: os[i] = as[i] * bs[i]; break;
      }
    }
  });
  check_finite(out, name);
  Tape::record(name, {a, b}, out, [a, b, kind](const Tensor& g, std::span<Tensor> gi) {
    dispatch(a.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto gs = g.data<T>();
      if (gi[0].defined()) {
        auto da = gi[0].data<T>();
        auto bs = b.data<T>();
        for (std::size_t i = 0; i < gs.size(); ++i) {
          da[i] += kind == BinaryKind::mul ? gs[i] * bs[i] : gs[i];
        }
      }
      if (gi[1].defined()) {
        auto db = gi[1].data<T>();
        auto as = a.data<T>();
        for (std::size_t i = 0; i < gs.size(); ++i) {
          switch (kind) {
            case BinaryKind::add: db[i] += gs[i]; break;
            case BinaryKind::sub: db[i] -= gs[i]; break;
            case BinaryKind::mul: db[i] += gs[i] * as[i]; break;
          }
        }
      }
    });
  });
  return out;
}

Tensor reduce_op(const char* name, const Tensor& x, bool average) {
  Tensor out = Tensor::zeros({}, x.dtype());
  const double n = static_cast<double>(x.numel());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    // Accumulate in double so f32 sums over large volumes stay accurate.
    // Means are taken about the first element, which makes the mean of a
    // constant tensor exact.
    const auto xs = x.data<T>();
    const double shift = average && !xs.empty() ? static_cast<double>(xs[0]) : 0.0;
    double acc = 0.0;
    for (auto v : xs) acc += static_cast<double>(v) - shift;
    out.data<T>()[0] = static_cast<T>(average ? shift + acc / n : acc);
  });
  check_finite(out, name);
  Tape::record(name, {x}, out, [average, n](const Tensor& g, std::span<Tensor> gi) {
    dispatch(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T gv = static_cast<T>(average ? g.data<T>()[0] / n : g.data<T>()[0]);
      for (auto& v : gi[0].data<T>()) v += gv;
    });
  });
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op("add", BinaryKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op("sub", BinaryKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op("mul", BinaryKind::mul, a, b); }

Tensor sum(const Tensor& x) { return reduce_op("sum", x, false); }
Tensor mean(const Tensor& x) { return reduce_op("mean", x, true); }

Tensor temporal_conv1d_depthwise(const Tensor& x, const Tensor& k, bool causal) {
  require_rank5(x, "temporal_conv1d_depthwise");
  check_same_dtype(x, k, "temporal_conv1d_depthwise");
  const std::int64_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
  const std::int64_t plane = x.dim(3) * x.dim(4);
  if (k.rank() != 2 || k.dim(0) != C) {
    throw ShapeError("temporal_conv1d_depthwise: kernels must be [" + std::to_string(C) +
                     ",K], got " + shape_str(k.shape()));
  }
  const std::int64_t K = k.dim(1);
  if (K % 2 == 0) {
    throw ShapeError("temporal_conv1d_depthwise: kernel size must be odd, got " +
                     std::to_string(K));
  }
  if (K > 2 * L - 1) {
    throw ShapeError("temporal_conv1d_depthwise: kernel size " + std::to_string(K) +
                     " exceeds 2L-1 = " + std::to_string(2 * L - 1));
  }
  const std::int64_t half = (K - 1) / 2;
  const std::int64_t last_tap = causal ? half : K - 1;

  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto xs = x.data<T>();
    auto ks = k.data<T>();
    auto os = out.data<T>();
    for (std::int64_t b = 0; b < B; ++b) {
      for (std::int64_t c = 0; c < C; ++c) {
        const std::int64_t base = (b * C + c) * L * plane;
        for (std::int64_t t = 0; t < L; ++t) {
          T* dst = os.data() + base + t * plane;
          for (std::int64_t j = 0; j <= last_tap; ++j) {
            const std::int64_t src_t = t + j - half;
            if (src_t < 0 || src_t >= L) continue;
            const T kv = ks[c * K + j];
            const T* src = xs.data() + base + src_t * plane;
            for (std::int64_t p = 0; p < plane; ++p) dst[p] += kv * src[p];
          }
        }
      }
    }
  });
  check_finite(out, "temporal_conv1d_depthwise");
  Tape::record("temporal_conv1d_depthwise", {x, k}, out,
               [x, k, B, C, L, K, plane, half, last_tap](const Tensor& g, std::span<Tensor> gi) {
                 dispatch(x.dtype(), [&](auto tag) {
                   using T = decltype(tag);
                   auto xs = x.data<T>();
                   auto ks = k.data<T>();
                   auto gs = g.data<T>();
                   for (std::int64_t b = 0; b < B; ++b) {
                     for (std::int64_t c = 0; c < C; ++c) {
                       const std::int64_t base = (b * C + c) * L * plane;
                       for (std::int64_t t = 0; t < L; ++t) {
                         const T* gt = gs.data() + base + t * plane;
                         for (std::int64_t j = 0; j <= last_tap; ++j) {
                           const std::int64_t src_t = t + j - half;
                           if (src_t < 0 || src_t >= L) continue;
                           if (gi[0].defined()) {
                             T* dx = gi[0].data<T>().data() + base + src_t * plane;
                             const T kv = ks[c * K + j];
                             for (std::int64_t p = 0; p < plane; ++p) dx[p] += kv * gt[p];
                           }
                           if (gi[1].defined()) {
                             const T* src = xs.data() + base + src_t * plane;
                             double acc = 0.0;
                             for (std::int64_t p = 0; p < plane; ++p) acc += gt[p] * src[p];
                             gi[1].data<T>()[c * K + j] += static_cast<T>(acc);
                           }
                         }
                       }
                     }
                   }
                 });
               });
  return out;
}

namespace {

struct LinearTaps {
  std::vector<std::int64_t> lo, hi;
  std::vector<double> frac;
};

// Half-pixel-center sampling positions, clamped at the low edge like the
// common framework implementations.
LinearTaps linear_taps(std::int64_t in, std::int64_t out) {
  LinearTaps taps;
  taps.lo.resize(out);
  taps.hi.resize(out);
  taps.frac.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    auto i0 = static_cast<std::int64_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    taps.lo[o] = i0;
    taps.hi[o] = std::min(i0 + 1, in - 1);
    taps.frac[o] = src - static_cast<double>(i0);
  }
  return taps;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, std::int64_t out_h, std::int64_t out_w) {
  require_rank5(x, "bilinear_resize");
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("bilinear_resize: target size must be >= 1, got " + std::to_string(out_h) +
                     "x" + std::to_string(out_w));
  }
  const std::int64_t planes = x.dim(0) * x.dim(1) * x.dim(2);
  const std::int64_t H = x.dim(3), W = x.dim(4);
  auto ty = std::make_shared<LinearTaps>(linear_taps(H, out_h));
  auto tx = std::make_shared<LinearTaps>(linear_taps(W, out_w));
  Tensor out = Tensor::zeros({x.dim(0), x.dim(1), x.dim(2), out_h, out_w}, x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto xs = x.data<T>();
    auto os = out.data<T>();
    for (std::int64_t p = 0; p < planes; ++p) {
      const T* src = xs.data() + p * H * W;
      T* dst = os.data() + p * out_h * out_w;
      for (std::int64_t oy = 0; oy < out_h; ++oy) {
        const T fy = static_cast<T>(ty->frac[oy]);
        const T* r0 = src + ty->lo[oy] * W;
        const T* r1 = src + ty->hi[oy] * W;
        for (std::int64_t ox = 0; ox < out_w; ++ox) {
          const T fx = static_cast<T>(tx->frac[ox]);
          const auto x0 = tx->lo[ox], x1 = tx->hi[ox];
          const T top = (T(1) - fx) * r0[x0] + fx * r0[x1];
          const T bottom = (T(1) - fx) * r1[x0] + fx * r1[x1];
          dst[oy * out_w + ox] = (T(1) - fy) * top + fy * bottom;
        }
      }
    }
  });
  check_finite(out, "bilinear_resize");
  Tape::record("bilinear_resize", {x}, out,
               [ty, tx, planes, H, W, out_h, out_w](const Tensor& g, std::span<Tensor> gi) {
                 dispatch(g.dtype(), [&](auto tag) {
                   using T = decltype(tag);
                   auto gs = g.data<T>();
                   auto dx = gi[0].data<T>();
                   for (std::int64_t p = 0; p < planes; ++p) {
                     const T* src = gs.data() + p * out_h * out_w;
                     T* dst = dx.data() + p * H * W;
                     for (std::int64_t oy = 0; oy < out_h; ++oy) {
                       const T fy = static_cast<T>(ty->frac[oy]);
                       T* r0 = dst + ty->lo[oy] * W;
                       T* r1 = dst + ty->hi[oy] * W;
                       for (std::int64_t ox = 0; ox < out_w; ++ox) {
                         const T fx = static_cast<T>(tx->frac[ox]);
                         const auto x0 = tx->lo[ox], x1 = tx->hi[ox];
                         const T gv = src[oy * out_w + ox];
                         r0[x0] += (T(1) - fy) * (T(1) - fx) * gv;
                         r0[x1] += (T(1) - fy) * fx * gv;
                         r1[x0] += fy * (T(1) - fx) * gv;
                         r1[x1] += fy * fx * gv;
                       }
                     }
                   }
                 });
               });
  return out;
}

Tensor gram_matrix(const Tensor& feat) {
  require_rank5(feat, "gram_matrix");
  const std::int64_t B = feat.dim(0), C = feat.dim(1), L = feat.dim(2);
  const std::int64_t plane = feat.dim(3) * feat.dim(4);
  const double norm = static_cast<double>(C * plane);
  Tensor out = Tensor::zeros({B, L, C, C}, feat.dtype());
  dispatch(feat.dtype(), [&](auto tag) {
    using T = decltype(tag);
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Strided = Eigen::Map<const Mat, Eigen::Unaligned, Eigen::OuterStride<>>;
    for (std::int64_t b = 0; b < B; ++b) {
      for (std::int64_t t = 0; t < L; ++t) {
        Strided f(feat.data<T>().data() + (b * C * L + t) * plane, C, plane,
                  Eigen::OuterStride<>(L * plane));
        Eigen::Map<Mat> gm(out.data<T>().data() + (b * L + t) * C * C, C, C);
        gm.noalias() = f * f.transpose();
        gm /= static_cast<T>(norm);
      }
    }
  });
  check_finite(out, "gram_matrix");
  Tape::record("gram_matrix", {feat}, out,
               [feat, B, C, L, plane, norm](const Tensor& g, std::span<Tensor> gi) {
                 dispatch(feat.dtype(), [&](auto tag) {
                   using T = decltype(tag);
                   using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
                   using Strided = Eigen::Map<const Mat, Eigen::Unaligned, Eigen::OuterStride<>>;
                   using StridedMut = Eigen::Map<Mat, Eigen::Unaligned, Eigen::OuterStride<>>;
                   for (std::int64_t b = 0; b < B; ++b) {
                     for (std::int64_t t = 0; t < L; ++t) {
                       const std::int64_t off = (b * C * L + t) * plane;
                       Strided f(feat.data<T>().data() + off, C, plane,
                                 Eigen::OuterStride<>(L * plane));
                       Eigen::Map<const Mat> gg(g.data<T>().data() + (b * L + t) * C * C, C, C);
                       StridedMut df(gi[0].data<T>().data() + off, C, plane,
                                     Eigen::OuterStride<>(L * plane));
                       Mat sym = (gg + gg.transpose()) / static_cast<T>(norm);
                       df.noalias() += sym * f;
                     }
                   }
                 });
               });
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank5(a, "concat_channels");
  require_rank5(b, "concat_channels");
  check_same_dtype(a, b, "concat_channels");
  for (int axis : {0, 2, 3, 4}) {
    if (a.dim(axis) != b.dim(axis)) {
      throw ShapeError("concat_channels: incompatible shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
    }
  }
  const std::int64_t B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1);
  const std::int64_t block = a.dim(2) * a.dim(3) * a.dim(4);
  Tensor out = Tensor::zeros({B, Ca + Cb, a.dim(2), a.dim(3), a.dim(4)}, a.dtype());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto as = a.data<T>();
    auto bs = b.data<T>();
    auto os = out.data<T>();
    for (std::int64_t n = 0; n < B; ++n) {
      std::copy_n(as.data() + n * Ca * block, Ca * block, os.data() + n * (Ca + Cb) * block);
      std::copy_n(bs.data() + n * Cb * block, Cb * block,
                  os.data() + (n * (Ca + Cb) + Ca) * block);
    }
  });
  Tape::record("concat_channels", {a, b}, out,
               [B, Ca, Cb, block](const Tensor& g, std::span<Tensor> gi) {
                 dispatch(g.dtype(), [&](auto tag) {
                   using T = decltype(tag);
                   auto gs = g.data<T>();
                   for (std::int64_t n = 0; n < B; ++n) {
                     if (gi[0].defined()) {
                       auto da = gi[0].data<T>();
                       const T* src = gs.data() + n * (Ca + Cb) * block;
                       for (std::int64_t i = 0; i < Ca * block; ++i) da[n * Ca * block + i] += src[i];
                     }
                     if (gi[1].defined()) {
                       auto db = gi[1].data<T>();
                       const T* src = gs.data() + (n * (Ca + Cb) + Ca) * block;
                       for (std::int64_t i = 0; i < Cb * block; ++i) db[n * Cb * block + i] += src[i];
                     }
                   }
                 });
               });
  return out;
}

Tensor broadcast_channels(const Tensor& x, std::int64_t channels) {
  require_rank5(x, "broadcast_channels");
  if (x.dim(1) != 1) {
    throw ShapeError("broadcast_channels: expected a single channel, got " +
                     shape_str(x.shape()));
  }
  const std::int64_t B = x.dim(0);
  const std::int64_t block = x.dim(2) * x.dim(3) * x.dim(4);
  Tensor out = Tensor::zeros({B, channels, x.dim(2), x.dim(3), x.dim(4)}, x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto xs = x.data<T>();
    auto os = out.data<T>();
    for (std::int64_t n = 0; n < B; ++n) {
      for (std::int64_t c = 0; c < channels; ++c) {
        std::copy_n(xs.data() + n * block, block, os.data() + (n * channels + c) * block);
      }
    }
  });
  Tape::record("broadcast_channels", {x}, out,
               [B, channels, block](const Tensor& g, std::span<Tensor> gi) {
                 dispatch(g.dtype(), [&](auto tag) {
                   using T = decltype(tag);
                   auto gs = g.data<T>();
                   auto dx = gi[0].data<T>();
                   for (std::int64_t n = 0; n < B; ++n) {
                     for (std::int64_t c = 0; c < channels; ++c) {
                       const T* src = gs.data() + (n * channels + c) * block;
                       for (std::int64_t i = 0; i < block; ++i) dx[n * block + i] += src[i];
                     }
                   }
                 });
               });
  return out;
}

}  // namespace lgtsm::ops
