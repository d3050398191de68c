#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cwk/tensor.hpp"

namespace cwk {

// Fraction of pixels whose labels differ.
inline double score_map_distance(const LabelMap& a, const LabelMap& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("score_map_distance: dim mismatch");
  size_t diff = 0;
  for (size_t i = 0; i < a.labels.size(); ++i)
    if (a.labels[i] != b.labels[i]) ++diff;
  return static_cast<double>(diff) / static_cast<double>(a.labels.size());
}

struct ConfusionMatrix {
  int n_cl = 0;
  std::vector<uint64_t> counts;  // counts[true * n_cl + pred]

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes)
      : n_cl(classes), counts(static_cast<size_t>(classes) * classes, 0) {
    if (classes < 1) throw std::invalid_argument("ConfusionMatrix: n_cl >= 1");
  }

  uint64_t& at(int true_c, int pred_c) { return counts[true_c * n_cl + pred_c]; }
  uint64_t at(int true_c, int pred_c) const { return counts[true_c * n_cl + pred_c]; }

  uint64_t total() const {
    uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }

  void merge(const ConfusionMatrix& o) {
    if (o.n_cl != n_cl) throw std::invalid_argument("merge: class count mismatch");
    for (size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
  }
};

// Ignore-labeled ground-truth pixels are excluded.
inline ConfusionMatrix accumulate_confusion(const LabelMap& pred,
                                            const LabelMap& gt, int n_cl,
                                            uint8_t ignore = kIgnoreLabel) {
  if (!pred.same_shape(gt))
    throw std::invalid_argument("accumulate_confusion: dim mismatch");
  ConfusionMatrix cm(n_cl);
  for (size_t i = 0; i < gt.labels.size(); ++i) {
    uint8_t t = gt.labels[i];
    if (t == ignore) continue;
    uint8_t p = pred.labels[i];
    if (t >= n_cl || p >= n_cl)
      throw std::invalid_argument("accumulate_confusion: label out of range");
    cm.at(t, p)++;
  }
  return cm;
}

// (1/n_cl) sum_i n_ii / (t_i + sum_j n_ji - n_ii), classes absent from both
// prediction and ground truth excluded from the mean.
inline double mean_iu(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int valid = 0;
  for (int i = 0; i < cm.n_cl; ++i) {
    uint64_t t_i = 0, col_i = 0;
    for (int j = 0; j < cm.n_cl; ++j) {
      t_i += cm.at(i, j);
      col_i += cm.at(j, i);
    }
    uint64_t denom = t_i + col_i - cm.at(i, i);
    if (denom == 0) continue;
    sum += static_cast<double>(cm.at(i, i)) / static_cast<double>(denom);
    ++valid;
  }
  if (valid == 0) throw std::runtime_error("mean_iu: all classes degenerate");
  return sum / valid;
}

// (sum_k t_k)^-1 sum_i t_i n_ii / (t_i + sum_j n_ji - n_ii)
inline double fw_iu(const ConfusionMatrix& cm) {
  uint64_t total = cm.total();
  if (total == 0) throw std::runtime_error("fw_iu: empty matrix");
  double sum = 0.0;
  for (int i = 0; i < cm.n_cl; ++i) {
    uint64_t t_i = 0, col_i = 0;
    for (int j = 0; j < cm.n_cl; ++j) {
      t_i += cm.at(i, j);
      col_i += cm.at(j, i);
    }
    uint64_t denom = t_i + col_i - cm.at(i, i);
    if (denom == 0) continue;
    sum += static_cast<double>(t_i) * static_cast<double>(cm.at(i, i)) /
           static_cast<double>(denom);
  }
  return sum / static_cast<double>(total);
}

// Band of total width 2*radius straddling label boundaries: the boundary
// pixels themselves (those with a 4-neighbor of a different label, one row on
// each side of the dividing line) dilated radius-1 times under the Chebyshev
// metric.
inline std::vector<uint8_t> boundary_band_mask(const LabelMap& gt, int radius) {
  if (radius < 1) throw std::invalid_argument("boundary_band_mask: radius >= 1");
  int h = gt.height, w = gt.width;
  std::vector<uint8_t> boundary(static_cast<size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      uint8_t l = gt.at(y, x);
      bool b = (y > 0 && gt.at(y - 1, x) != l) ||
               (y + 1 < h && gt.at(y + 1, x) != l) ||
               (x > 0 && gt.at(y, x - 1) != l) ||
               (x + 1 < w && gt.at(y, x + 1) != l);
      boundary[static_cast<size_t>(y) * w + x] = b ? 1 : 0;
    }
  // Chebyshev dilation: 3x3 max applied radius-1 times.
  std::vector<uint8_t> mask = boundary;
  std::vector<uint8_t> next(mask.size());
  for (int r = 1; r < radius; ++r) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        uint8_t m = 0;
        for (int dy = -1; dy <= 1 && !m; ++dy)
          for (int dx = -1; dx <= 1 && !m; ++dx) {
            int yy = y + dy, xx = x + dx;
            if (yy >= 0 && yy < h && xx >= 0 && xx < w &&
                mask[static_cast<size_t>(yy) * w + xx])
              m = 1;
          }
        next[static_cast<size_t>(y) * w + x] = m;
      }
    mask.swap(next);
  }
  return mask;
}

// Off-band ground-truth pixels become ignore, restricting metrics to the band.
inline LabelMap apply_band(const LabelMap& gt, const std::vector<uint8_t>& mask,
                           uint8_t ignore = kIgnoreLabel) {
  if (mask.size() != gt.labels.size())
    throw std::invalid_argument("apply_band: mask size mismatch");
  LabelMap out = gt;
  for (size_t i = 0; i < out.labels.size(); ++i)
    if (!mask[i]) out.labels[i] = ignore;
  return out;
}

struct SeriesStats {
  double mean = 0.0;
  double stdev = 0.0;
  std::vector<double> series;
};

inline SeriesStats series_stats(std::vector<double> series) {
  SeriesStats s;
  s.series = std::move(series);
  if (s.series.empty()) return s;
  for (double v : s.series) s.mean += v;
  s.mean /= static_cast<double>(s.series.size());
  double acc = 0.0;
  for (double v : s.series) acc += (v - s.mean) * (v - s.mean);
  s.stdev = std::sqrt(acc / static_cast<double>(s.series.size()));
  return s;
}

// Fraction of pixels whose quantized mean intensity changes between frames.
// The quantization step is 1/levels of the sequence dynamic range.
inline std::vector<double> pixel_difference_series(const std::vector<Tensor>& frames,
                                                   int levels = 32) {
  if (frames.size() < 2)
    throw std::invalid_argument("pixel_difference_series: need >= 2 frames");
  float lo = frames[0].data[0], hi = frames[0].data[0];
  for (const auto& f : frames)
    for (float v : f.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  float range = hi - lo;
  auto quantize = [&](const Tensor& f, int y, int x) {
    float acc = 0.0f;
    for (int c = 0; c < f.channels; ++c) acc += f.at(c, y, x);
    acc /= static_cast<float>(f.channels);
    if (range <= 0.0f) return 0;
    int q = static_cast<int>((acc - lo) / range * levels);
    return std::min(q, levels - 1);
  };
  std::vector<double> series;
  for (size_t t = 1; t < frames.size(); ++t) {
    const Tensor& a = frames[t - 1];
    const Tensor& b = frames[t];
    if (a.height != b.height || a.width != b.width)
      throw std::invalid_argument("pixel_difference_series: dim mismatch");
    size_t diff = 0;
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x)
        if (quantize(a, y, x) != quantize(b, y, x)) ++diff;
    series.push_back(static_cast<double>(diff) /
                     (static_cast<double>(a.height) * a.width));
  }
  return series;
}

}  // namespace cwk
