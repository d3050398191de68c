#pragma once

#include <algorithm>
#include <stdexcept>

#include "cwk/tensor.hpp"

namespace cwk {

// Convolution weight bank: out_c filters of shape in_c x kh x kw, row-major.
struct ConvWeights {
  int out_c = 0;
  int in_c = 0;
  int kh = 0;
  int kw = 0;
  std::vector<float> w;     // out_c * in_c * kh * kw
  std::vector<float> bias;  // out_c

  float at(int oc, int ic, int ky, int kx) const {
    return w[((static_cast<size_t>(oc) * in_c + ic) * kh + ky) * kw + kx];
  }
  float& at(int oc, int ic, int ky, int kx) {
    return w[((static_cast<size_t>(oc) * in_c + ic) * kh + ky) * kw + kx];
  }

  bool operator==(const ConvWeights& o) const {
    return out_c == o.out_c && in_c == o.in_c && kh == o.kh && kw == o.kw &&
           w == o.w && bias == o.bias;
  }
};

// Zero padding; accumulation order fixed (input-channel outer, kernel rows,
// kernel columns) so results are bit-reproducible.
inline Tensor conv2d(const Tensor& input, const ConvWeights& k, int stride = 1,
                     int pad = 0) {
  if (input.channels != k.in_c)
    throw std::invalid_argument("conv2d: input channels != kernel in_c");
  if (k.kh % 2 == 0 || k.kw % 2 == 0)
    throw std::invalid_argument("conv2d: kernel dims must be odd");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0");
  int out_h = (input.height + 2 * pad - k.kh) / stride + 1;
  int out_w = (input.width + 2 * pad - k.kw) / stride + 1;
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("conv2d: zero-sized output");

  Tensor out(k.out_c, out_h, out_w);
  for (int oc = 0; oc < k.out_c; ++oc) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        float acc = k.bias.empty() ? 0.0f : k.bias[oc];
        for (int ic = 0; ic < k.in_c; ++ic) {
          for (int ky = 0; ky < k.kh; ++ky) {
            int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= input.height) continue;
            for (int kx = 0; kx < k.kw; ++kx) {
              int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= input.width) continue;
              acc += k.at(oc, ic, ky, kx) * input.at(ic, iy, ix);
            }
          }
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  }
  out.check_finite("conv2d");
  return out;
}

inline Tensor maxpool2d(const Tensor& input, int window, int stride) {
  if (window < 1 || stride < 1)
    throw std::invalid_argument("maxpool2d: window and stride must be >= 1");
  if (window > input.height || window > input.width)
    throw std::invalid_argument("maxpool2d: window larger than input");
  int out_h = (input.height - window) / stride + 1;
  int out_w = (input.width - window) / stride + 1;
  Tensor out(input.channels, out_h, out_w);
  for (int c = 0; c < input.channels; ++c)
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox) {
        float m = input.at(c, oy * stride, ox * stride);
        for (int wy = 0; wy < window; ++wy)
          for (int wx = 0; wx < window; ++wx)
            m = std::max(m, input.at(c, oy * stride + wy, ox * stride + wx));
        out.at(c, oy, ox) = m;
      }
  return out;
}

inline Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data) v = std::max(0.0f, v);
  return out;
}

// Align-corners bilinear: output pixel (i,j) samples the input at
// (i*(H-1)/(outH-1), j*(W-1)/(outW-1)); degenerate axes sample index 0.
inline Tensor upsample_bilinear(const Tensor& input, int factor) {
  if (factor < 1) throw std::invalid_argument("upsample_bilinear: factor >= 1");
  if (factor == 1) return input;
  int out_h = input.height * factor;
  int out_w = input.width * factor;
  Tensor out(input.channels, out_h, out_w);
  for (int c = 0; c < input.channels; ++c)
    for (int oy = 0; oy < out_h; ++oy) {
      float sy = (out_h > 1 && input.height > 1)
                     ? static_cast<float>(oy) * (input.height - 1) / (out_h - 1)
                     : 0.0f;
      int y0 = static_cast<int>(sy);
      int y1 = std::min(y0 + 1, input.height - 1);
      float fy = sy - y0;
      for (int ox = 0; ox < out_w; ++ox) {
        float sx = (out_w > 1 && input.width > 1)
                       ? static_cast<float>(ox) * (input.width - 1) / (out_w - 1)
                       : 0.0f;
        int x0 = static_cast<int>(sx);
        int x1 = std::min(x0 + 1, input.width - 1);
        float fx = sx - x0;
        float top = input.at(c, y0, x0) * (1.0f - fx) + input.at(c, y0, x1) * fx;
        float bot = input.at(c, y1, x0) * (1.0f - fx) + input.at(c, y1, x1) * fx;
        out.at(c, oy, ox) = top * (1.0f - fy) + bot * fy;
      }
    }
  return out;
}

// Ties broken toward the lowest channel index.
inline LabelMap argmax_channels(const Tensor& scores) {
  if (scores.channels < 1)
    throw std::invalid_argument("argmax_channels: need >= 1 channel");
  LabelMap out(scores.height, scores.width);
  for (int y = 0; y < scores.height; ++y)
    for (int x = 0; x < scores.width; ++x) {
      int best = 0;
      float bv = scores.at(0, y, x);
      for (int c = 1; c < scores.channels; ++c) {
        float v = scores.at(c, y, x);
        if (v > bv) {
          bv = v;
          best = c;
        }
      }
      out.at(y, x) = static_cast<uint8_t>(best);
    }
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

}  // namespace cwk
