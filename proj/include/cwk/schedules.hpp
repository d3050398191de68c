#pragma once

#include <numeric>

#include "cwk/clockwork.hpp"
#include "cwk/metrics.hpp"

namespace cwk {

// Analytic per-stage compute fractions; full-frame cost normalizes to 1.
struct CostModel {
  std::vector<double> stage_cost;
  double fusion_cost = 0.0;

  void validate() const {
    double total = fusion_cost;
    for (double c : stage_cost) {
      if (c < 0.0) throw std::invalid_argument("CostModel: negative stage cost");
      total += c;
    }
    if (fusion_cost < 0.0)
      throw std::invalid_argument("CostModel: negative fusion cost");
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("CostModel: costs must sum to 1");
  }

  // Cumulative 59% / 77% / 100% stage envelopes; the residual 23% is split
  // 0.21 stage-3 + 0.02 fusion. The 2-stage model merges the first two stages.
  static CostModel paper_default(int stages) {
    CostModel m;
    if (stages == 3)
      m.stage_cost = {0.59, 0.18, 0.21};
    else if (stages == 2)
      m.stage_cost = {0.77, 0.21};
    else
      throw std::invalid_argument("CostModel: paper default covers 2 or 3 stages");
    m.fusion_cost = 0.02;
    m.validate();
    return m;
  }
};

struct ScheduleCost {
  double mean_fraction = 0.0;
  std::vector<double> frame_cost;
};

struct RunReport {
  std::vector<LabelMap> outputs;
  std::vector<std::vector<uint8_t>> executed;  // [frame][stage]
  std::vector<double> signals;                 // adaptive source-stage d_sm
  std::vector<double> frame_cost;
  double compute_fraction = 0.0;
  double latency = 0.0;        // steady-state, fusion included
  double latency_paper = 0.0;  // paper-comparable accounting, fusion excluded
  double full_frame_fraction = 0.0;
};

// Per-frame cost = executed stage costs + fusion cost (output clock is
// all-ones, so fusion runs every frame; emitting caches is free).
inline ScheduleCost account(const std::vector<std::vector<uint8_t>>& executed,
                            const CostModel& cost) {
  cost.validate();
  if (executed.empty()) throw std::invalid_argument("account: empty run");
  ScheduleCost out;
  for (const auto& mask : executed) {
    if (mask.size() != cost.stage_cost.size())
      throw std::invalid_argument("account: stage count mismatch");
    double c = cost.fusion_cost;
    for (size_t k = 0; k < mask.size(); ++k)
      if (mask[k]) c += cost.stage_cost[k];
    out.frame_cost.push_back(c);
  }
  out.mean_fraction =
      std::accumulate(out.frame_cost.begin(), out.frame_cost.end(), 0.0) /
      static_cast<double>(out.frame_cost.size());
  return out;
}

namespace detail {

inline void finish_report(RunReport& r, const CostModel& cost, int deepest) {
  ScheduleCost sc = account(r.executed, cost);
  r.frame_cost = std::move(sc.frame_cost);
  r.compute_fraction = sc.mean_fraction;
  int full = 0;
  for (const auto& mask : r.executed)
    if (mask[deepest]) ++full;
  r.full_frame_fraction =
      static_cast<double>(full) / static_cast<double>(r.executed.size());
}

inline void check_frames(const StageModel& net, const std::vector<Tensor>& frames) {
  if (frames.empty()) throw std::invalid_argument("schedule: empty frame sequence");
  for (const auto& f : frames)
    if (f.channels != net.input_channels())
      throw std::invalid_argument("schedule: frame channels mismatch");
}

}  // namespace detail

inline RunReport run_oracle(const StageModel& net, const std::vector<Tensor>& frames,
                            const CostModel& cost) {
  detail::check_frames(net, frames);
  RunReport r;
  for (const auto& frame : frames) {
    ForwardResult fr = full_forward(net, frame);
    r.outputs.push_back(argmax_channels(fr.fused));
    r.executed.emplace_back(net.stage_count(), 1);
    r.signals.push_back(0.0);
  }
  detail::finish_report(r, cost, net.stage_count() - 1);
  r.latency = 1.0;
  r.latency_paper = 1.0;
  return r;
}

// Stages 0..k-1 on every frame; deeper caches never exist and are excluded
// from fusion.
inline RunReport run_truncated(const StageModel& net,
                               const std::vector<Tensor>& frames, int k,
                               const CostModel& cost) {
  detail::check_frames(net, frames);
  if (k < 1 || k >= net.stage_count())
    throw std::invalid_argument("run_truncated: k must be in [1, stage_count)");
  RunReport r;
  for (const auto& frame : frames) {
    std::vector<Tensor> feats, scores;
    const Tensor* input = &frame;
    for (int s = 0; s < k; ++s) {
      StageOutput out = net.forward_stage(s, *input);
      feats.push_back(std::move(out.features));
      scores.push_back(std::move(out.score));
      input = &feats.back();
    }
    std::vector<const Tensor*> ptrs;
    for (const auto& s : scores) ptrs.push_back(&s);
    r.outputs.push_back(argmax_channels(fuse_scores(ptrs, frame.height, frame.width)));
    std::vector<uint8_t> mask(net.stage_count(), 0);
    for (int s = 0; s < k; ++s) mask[s] = 1;
    r.executed.push_back(std::move(mask));
    r.signals.push_back(0.0);
  }
  detail::finish_report(r, cost, net.stage_count() - 1);
  r.latency_paper = 0.0;
  for (int s = 0; s < k; ++s) r.latency_paper += cost.stage_cost[s];
  r.latency = r.latency_paper + cost.fusion_cost;
  return r;
}

// All stages run on every frame but on staggered inputs: at steady state the
// fusion for frame i combines stage k computed from frame i-k. Frame 0 seeds
// every cache with a full sequential pass.
inline RunReport run_pipeline(const StageModel& net,
                              const std::vector<Tensor>& frames, int k_stages,
                              const CostModel& cost) {
  detail::check_frames(net, frames);
  if (k_stages != 2 && k_stages != 3)
    throw std::invalid_argument("run_pipeline: k_stages must be 2 or 3");
  if (net.stage_count() != k_stages)
    throw std::invalid_argument(
        "run_pipeline: net stage count must match k_stages (merge first)");
  int n = net.stage_count();
  RunReport r;
  ForwardResult warm = full_forward(net, frames[0]);
  std::vector<Tensor> features = std::move(warm.features);
  std::vector<Tensor> scores = std::move(warm.scores);
  r.outputs.push_back(argmax_channels(warm.fused));
  r.executed.emplace_back(n, 1);
  r.signals.push_back(0.0);
  for (size_t t = 1; t < frames.size(); ++t) {
    std::vector<Tensor> nf(n), ns(n);
    StageOutput s0 = net.forward_stage(0, frames[t]);
    nf[0] = std::move(s0.features);
    ns[0] = std::move(s0.score);
    for (int k = 1; k < n; ++k) {
      StageOutput sk = net.forward_stage(k, features[k - 1]);
      nf[k] = std::move(sk.features);
      ns[k] = std::move(sk.score);
    }
    features = std::move(nf);
    scores = std::move(ns);
    std::vector<const Tensor*> ptrs;
    for (const auto& s : scores) ptrs.push_back(&s);
    r.outputs.push_back(
        argmax_channels(fuse_scores(ptrs, frames[t].height, frames[t].width)));
    r.executed.emplace_back(n, 1);
    r.signals.push_back(0.0);
  }
  detail::finish_report(r, cost, n - 1);
  r.latency_paper = *std::max_element(cost.stage_cost.begin(), cost.stage_cost.end());
  r.latency = r.latency_paper + cost.fusion_cost;
  return r;
}

// Stage k executes at frame t iff t mod rates[k] == 0; skipped stages
// contribute cached scores to the every-frame fusion.
inline RunReport run_fixed_rate(const StageModel& net,
                                const std::vector<Tensor>& frames,
                                const std::vector<int>& rates,
                                const CostModel& cost) {
  detail::check_frames(net, frames);
  if (static_cast<int>(rates.size()) != net.stage_count())
    throw std::invalid_argument("run_fixed_rate: rates length != stage count");
  bool all_equal = true;
  for (int rt : rates) {
    if (rt < 1) throw std::invalid_argument("run_fixed_rate: rates must be >= 1");
    if (rt != rates[0]) all_equal = false;
  }
  // stage 0 runs every frame, except for the skip-frame baseline where the
  // whole net idles on off-frames
  if (rates[0] != 1 && !all_equal)
    throw std::invalid_argument("run_fixed_rate: rate of stage 0 must be 1");
  std::vector<Clock> clocks;
  for (int rt : rates) clocks.push_back(ModuloClock{rt, 0});
  FcnClockworkConfig cfg = make_clockfcn_config(net, clocks);
  FcnClockworkState state = make_fcn_state(cfg);
  RunReport r;
  for (size_t t = 0; t < frames.size(); ++t) {
    std::vector<bool> fire(rates.size());
    std::vector<uint8_t> mask(rates.size());
    for (size_t k = 0; k < rates.size(); ++k) {
      fire[k] = t == 0 ? true : clock_fires(cfg.input_clocks[k], static_cast<int>(t));
      mask[k] = fire[k] ? 1 : 0;
    }
    Tensor fused = fcn_step_masked(cfg, state, frames[t], fire);
    r.outputs.push_back(argmax_channels(fused));
    r.executed.push_back(std::move(mask));
    r.signals.push_back(0.0);
  }
  detail::finish_report(r, cost, net.stage_count() - 1);
  r.latency = 1.0;
  r.latency_paper = 1.0;
  return r;
}

// Stages 0..source_stage run every frame; deeper stages run only when the
// source-stage label change between consecutive frames strictly exceeds theta.
// compare_last_update switches the reference to the labels at the last deep
// update instead of the previous frame.
inline RunReport run_adaptive(const StageModel& net,
                              const std::vector<Tensor>& frames, double theta,
                              int source_stage, const CostModel& cost,
                              bool compare_last_update = false) {
  detail::check_frames(net, frames);
  if (theta < 0.0 || theta > 1.0)
    throw std::invalid_argument("run_adaptive: theta must be in [0,1]");
  if (source_stage < 0 || source_stage >= net.stage_count() - 1)
    throw std::invalid_argument("run_adaptive: source_stage must be shallower than the deepest stage");
  int n = net.stage_count();
  std::vector<Clock> clocks(n, AlwaysClock{});
  FcnClockworkConfig cfg = make_clockfcn_config(net, clocks);
  FcnClockworkState state = make_fcn_state(cfg);
  RunReport r;
  LabelMap ref_labels;
  for (size_t t = 0; t < frames.size(); ++t) {
    std::vector<bool> fire(n, false);
    double signal = 0.0;
    bool deep = false;
    if (t == 0) {
      std::fill(fire.begin(), fire.end(), true);
      deep = true;
    } else {
      for (int k = 0; k <= source_stage; ++k) fire[k] = true;
      // compute the source chain first so the signal reflects this frame
      for (int k = 0; k <= source_stage; ++k) {
        StageOutput out =
            net.forward_stage(k, k == 0 ? frames[t] : state.features[k - 1]);
        state.features[k] = std::move(out.features);
        state.scores[k] = std::move(out.score);
        state.last_update[k] = static_cast<int>(t);
      }
      LabelMap cur = argmax_channels(state.scores[source_stage]);
      signal = score_map_distance(cur, ref_labels);
      deep = signal > theta;
      for (int k = source_stage + 1; k < n; ++k) fire[k] = deep;
      // source stages were computed above; do not recompute in the step
      for (int k = 0; k <= source_stage; ++k) fire[k] = false;
    }
    Tensor fused = fcn_step_masked(cfg, state, frames[t], fire);
    LabelMap cur_src = argmax_channels(state.scores[source_stage]);
    if (t == 0 || deep || !compare_last_update) ref_labels = cur_src;
    r.outputs.push_back(argmax_channels(fused));
    std::vector<uint8_t> mask(n, 0);
    for (int k = 0; k <= source_stage; ++k) mask[k] = 1;
    for (int k = source_stage + 1; k < n; ++k) mask[k] = (t == 0 || deep) ? 1 : 0;
    r.executed.push_back(std::move(mask));
    r.signals.push_back(signal);
  }
  detail::finish_report(r, cost, n - 1);
  r.latency = 1.0;
  r.latency_paper = 1.0;
  return r;
}

}  // namespace cwk
