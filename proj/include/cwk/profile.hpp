#pragma once

#include "cwk/metrics.hpp"
#include "cwk/stagenet.hpp"

namespace cwk {

struct TemporalProfile {
  SeriesStats pixels;               // quantized input-intensity differences
  std::vector<SeriesStats> stages;  // per-stage score-label differences
};

// Per-stage mean/stdev of d_sm across consecutive frames, measured on each
// stage's argmax score labels at its own resolution, plus the raw input-pixel
// difference baseline.
inline TemporalProfile temporal_difference_profile(const StageModel& net,
                                                   const std::vector<Tensor>& frames,
                                                   int pixel_levels = 32) {
  if (frames.size() < 2)
    throw std::invalid_argument("temporal_difference_profile: need >= 2 frames");
  int n = net.stage_count();
  std::vector<std::vector<LabelMap>> stage_labels(n);
  for (const auto& frame : frames) {
    ForwardResult fr = full_forward(net, frame);
    for (int k = 0; k < n; ++k)
      stage_labels[k].push_back(argmax_channels(fr.scores[k]));
  }
  TemporalProfile profile;
  profile.pixels = series_stats(pixel_difference_series(frames, pixel_levels));
  for (int k = 0; k < n; ++k) {
    std::vector<double> series;
    for (size_t t = 1; t < frames.size(); ++t)
      series.push_back(score_map_distance(stage_labels[k][t], stage_labels[k][t - 1]));
    profile.stages.push_back(series_stats(std::move(series)));
  }
  return profile;
}

}  // namespace cwk
