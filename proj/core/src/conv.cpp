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
#include <string>
#include <vector>

#include "lgtsm/ops.hpp"
#include "lgtsm/parallel.hpp"
#include "lgtsm/tape.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lgtsm::ops {

namespace {

struct ConvGeometry {
  std::int64_t batch, in_channels, frames, height, width;
  std::int64_t out_channels, kt, kh, kw;
  std::int64_t stride, dilation, padding;
  std::int64_t out_h, out_w;

  std::int64_t patch() const { return in_channels * kt * kh * kw; }
  std::int64_t out_plane() const { return out_h * out_w; }
};

int thread_index() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

ConvGeometry conv_geometry(const Tensor& x, const Tensor& w, const Tensor& bias,
                           const Conv2dOptions& o, const char* op) {
  const int spatial_axis = w.rank() - 2;
  if (x.rank() != 5) {
    throw ShapeError(std::string(op) + ": input must be [B,C,L,H,W], got " + shape_str(x.shape()));
  }
  check_same_dtype(x, w, op);
  ConvGeometry g{};
  g.batch = x.dim(0);
  g.in_channels = x.dim(1);
  g.frames = x.dim(2);
  g.height = x.dim(3);
  g.width = x.dim(4);
  g.out_channels = w.dim(0);
  g.kt = w.rank() == 5 ? w.dim(2) : 1;
  g.kh = w.dim(spatial_axis);
  g.kw = w.dim(spatial_axis + 1);
  if (w.dim(1) != g.in_channels) {
    throw ShapeError(std::string(op) + ": weight expects " + std::to_string(w.dim(1)) +
                     " input channels but input " + shape_str(x.shape()) + " has " +
                     std::to_string(g.in_channels));
  }
  if (bias.defined()) {
    check_same_dtype(x, bias, op);
    if (bias.shape() != Shape{g.out_channels}) {
      throw ShapeError(std::string(op) + ": bias shape " + shape_str(bias.shape()) +
                       " does not match " + std::to_string(g.out_channels) + " output channels");
    }
  }
  if (o.stride < 1 || o.dilation < 1) {
    throw ShapeError(std::string(op) + ": stride and dilation must be >= 1");
  }
  g.stride = o.stride;
  g.dilation = o.dilation;
  if (o.padding == Conv2dOptions::kSamePadding) {
    if (g.kh % 2 == 0 || g.kw % 2 == 0) {
      throw ShapeError(std::string(op) + ": same padding needs odd kernel sizes");
    }
    if (g.kh != g.kw) throw ShapeError(std::string(op) + ": same padding needs square kernels");
    g.padding = g.dilation * (g.kh - 1) / 2;
  } else {
    if (o.padding < 0) throw ShapeError(std::string(op) + ": negative padding");
    g.padding = o.padding;
  }
  g.out_h = (g.height + 2 * g.padding - g.dilation * (g.kh - 1) - 1) / g.stride + 1;
  g.out_w = (g.width + 2 * g.padding - g.dilation * (g.kw - 1) - 1) / g.stride + 1;
  if (g.height + 2 * g.padding < g.dilation * (g.kh - 1) + 1 ||
      g.width + 2 * g.padding < g.dilation * (g.kw - 1) + 1 || g.out_h <= 0 || g.out_w <= 0) {
    throw ShapeError(std::string(op) + ": zero-size spatial output for input " +
                     shape_str(x.shape()) + " and kernel " + shape_str(w.shape()));
  }
  return g;
}

// Unfolds the receptive fields for output frame t of one batch item into
// col[patch, out_h*out_w]. Rows are ordered (ci, dt, i, j) to match the
// flattened weight layout. x_batch points at x[b,0,0,0,0].
template <typename T>
void im2col(const T* x_batch, const ConvGeometry& g, std::int64_t t, T* col) {
  const std::int64_t plane = g.height * g.width;
  const std::int64_t opl = g.out_plane();
  const std::int64_t half_t = (g.kt - 1) / 2;
  std::int64_t row = 0;
  for (std::int64_t ci = 0; ci < g.in_channels; ++ci) {
    for (std::int64_t dt = 0; dt < g.kt; ++dt) {
      const std::int64_t tt = t + dt - half_t;
      const bool frame_ok = tt >= 0 && tt < g.frames;
      const T* src = x_batch + (ci * g.frames + (frame_ok ? tt : 0)) * plane;
      for (std::int64_t i = 0; i < g.kh; ++i) {
        for (std::int64_t j = 0; j < g.kw; ++j, ++row) {
          T* dst = col + row * opl;
          if (!frame_ok) {
            std::fill(dst, dst + opl, T(0));
            continue;
          }
          for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
            const std::int64_t ih = oh * g.stride - g.padding + i * g.dilation;
            T* drow = dst + oh * g.out_w;
            if (ih < 0 || ih >= g.height) {
              std::fill(drow, drow + g.out_w, T(0));
              continue;
            }
            const T* srow = src + ih * g.width;
            for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
              const std::int64_t iw = ow * g.stride - g.padding + j * g.dilation;
              drow[ow] = (iw >= 0 && iw < g.width) ? srow[iw] : T(0);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col for the 2D case: scatters col back into gx_batch.
template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, std::int64_t t, T* gx_batch) {
  const std::int64_t plane = g.height * g.width;
  const std::int64_t opl = g.out_plane();
  std::int64_t row = 0;
  for (std::int64_t ci = 0; ci < g.in_channels; ++ci) {
    T* dst = gx_batch + (ci * g.frames + t) * plane;
    for (std::int64_t i = 0; i < g.kh; ++i) {
      for (std::int64_t j = 0; j < g.kw; ++j, ++row) {
        const T* src = col + row * opl;
        for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
          const std::int64_t ih = oh * g.stride - g.padding + i * g.dilation;
          if (ih < 0 || ih >= g.height) continue;
          T* drow = dst + ih * g.width;
          const T* srow = src + oh * g.out_w;
          for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
            const std::int64_t iw = ow * g.stride - g.padding + j * g.dilation;
            if (iw >= 0 && iw < g.width) drow[iw] += srow[ow];
          }
        }
      }
    }
  }
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

template <typename T>
void conv_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* out) {
  const std::int64_t frames_total = g.batch * g.frames;
  const std::int64_t patch = g.patch();
  const std::int64_t opl = g.out_plane();
  Eigen::Map<const RowMat<T>> wm(w, g.out_channels, patch);
#pragma omp parallel
  {
    std::vector<T> col(static_cast<std::size_t>(patch * opl));
#pragma omp for schedule(static)
    for (std::int64_t f = 0; f < frames_total; ++f) {
      const std::int64_t b = f / g.frames;
      const std::int64_t t = f % g.frames;
      im2col(x + b * g.in_channels * g.frames * g.height * g.width, g, t, col.data());
      Eigen::Map<const RowMat<T>> cm(col.data(), patch, opl);
      StridedMap<T> om(out + (b * g.out_channels * g.frames + t) * opl, g.out_channels, opl,
                       Eigen::OuterStride<>(g.frames * opl));
      om.noalias() = wm * cm;
      if (bias != nullptr) {
        for (std::int64_t co = 0; co < g.out_channels; ++co) om.row(co).array() += bias[co];
      }
    }
  }
}

template <typename T>
void conv_backward(const ConvGeometry& g, const T* x, const T* w, const T* gout, T* gx, T* gw,
                   T* gb) {
  const std::int64_t frames_total = g.batch * g.frames;
  const std::int64_t patch = g.patch();
  const std::int64_t opl = g.out_plane();
  const std::int64_t in_batch = g.in_channels * g.frames * g.height * g.width;
  Eigen::Map<const RowMat<T>> wm(w, g.out_channels, patch);

  const int threads = num_threads();
  std::vector<RowMat<T>> gw_partial;
  std::vector<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb_partial;
  if (gw != nullptr) gw_partial.assign(threads, RowMat<T>::Zero(g.out_channels, patch));
  if (gb != nullptr) {
    gb_partial.assign(threads, Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(g.out_channels));
  }

#pragma omp parallel num_threads(threads)
  {
    std::vector<T> col(static_cast<std::size_t>(patch * opl));
    RowMat<T> gcol;
    const int tid = thread_index();
#pragma omp for schedule(static)
    for (std::int64_t f = 0; f < frames_total; ++f) {
      const std::int64_t b = f / g.frames;
      const std::int64_t t = f % g.frames;
      ConstStridedMap<T> gm(gout + (b * g.out_channels * g.frames + t) * opl, g.out_channels,
                            opl, Eigen::OuterStride<>(g.frames * opl));
      if (gb != nullptr) gb_partial[tid] += gm.rowwise().sum();
      if (gw != nullptr) {
        im2col(x + b * in_batch, g, t, col.data());
        Eigen::Map<const RowMat<T>> cm(col.data(), patch, opl);
        gw_partial[tid].noalias() += gm * cm.transpose();
      }
      if (gx != nullptr) {
        gcol.noalias() = wm.transpose() * gm;
        col2im_add(gcol.data(), g, t, gx + b * in_batch);
      }
    }
  }
  for (int k = 0; k < threads; ++k) {
    if (gw != nullptr) {
      Eigen::Map<RowMat<T>> gwm(gw, g.out_channels, patch);
      gwm += gw_partial[k];
    }
    if (gb != nullptr) {
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gbm(gb, g.out_channels);
      gbm += gb_partial[k];
    }
  }
}

}  // namespace

Tensor conv2d_per_frame(const Tensor& x, const Tensor& w, const Tensor& bias,
                        const Conv2dOptions& options) {
  if (w.rank() != 4) {
    throw ShapeError("conv2d_per_frame: weight must be [Cout,Cin,kh,kw], got " +
                     shape_str(w.shape()));
  }
  const ConvGeometry g = conv_geometry(x, w, bias, options, "conv2d_per_frame");
  Tensor out = Tensor::zeros({g.batch, g.out_channels, g.frames, g.out_h, g.out_w}, x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    conv_forward<T>(g, x.data<T>().data(), w.data<T>().data(),
                    bias.defined() ? bias.data<T>().data() : nullptr, out.data<T>().data());
  });
  check_finite(out, "conv2d_per_frame");
  Tape::record("conv2d_per_frame", {x, w, bias}, out,
               [x, w, g](const Tensor& gout, std::span<Tensor> gi) {
                 dispatch(x.dtype(), [&](auto tag) {
                   using T = decltype(tag);
                   conv_backward<T>(g, x.data<T>().data(), w.data<T>().data(),
                                    gout.data<T>().data(),
                                    gi[0].defined() ? gi[0].data<T>().data() : nullptr,
                                    gi[1].defined() ? gi[1].data<T>().data() : nullptr,
                                    gi[2].defined() ? gi[2].data<T>().data() : nullptr);
                 });
               });
  return out;
}

Tensor conv3d_forward(const Tensor& x, const Tensor& w, const Tensor& bias,
                      const Conv2dOptions& spatial) {
  if (w.rank() != 5) {
    throw ShapeError("conv3d_forward: weight must be [Cout,Cin,kt,kh,kw], got " +
                     shape_str(w.shape()));
  }
  if (w.dim(2) % 2 == 0) throw ShapeError("conv3d_forward: temporal kernel must be odd");
  if (Tape* tape = Tape::active();
      tape != nullptr && (tape->tracks(x) || tape->tracks(w) || tape->tracks(bias))) {
    throw ShapeError("conv3d_forward: inference-only op called with tracked inputs");
  }
  const ConvGeometry g = conv_geometry(x, w, bias, spatial, "conv3d_forward");
  Tensor out = Tensor::zeros({g.batch, g.out_channels, g.frames, g.out_h, g.out_w}, x.dtype());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    conv_forward<T>(g, x.data<T>().data(), w.data<T>().data(),
                    bias.defined() ? bias.data<T>().data() : nullptr, out.data<T>().data());
  });
  check_finite(out, "conv3d_forward");
  return out;
}

}  // namespace lgtsm::ops
