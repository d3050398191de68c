#pragma once

#include <cmath>
#include <optional>
#include <variant>

#include "cwk/stagenet.hpp"

namespace cwk {

// ---------------------------------------------------------------------------
// Clocks

struct AlwaysClock {};
struct ModuloClock {
  int rate = 1;
  int phase = 0;
};
struct ThresholdClock {
  double theta = 0.0;   // strict comparison: fires iff signal > theta
  int source_stage = 0;
};
struct ExternalClock {
  std::vector<bool> mask;  // per-timestep; false beyond the end
};

using Clock = std::variant<AlwaysClock, ModuloClock, ThresholdClock, ExternalClock>;

inline bool clock_fires(const Clock& clock, int t,
                        std::optional<double> signal = std::nullopt) {
  if (std::holds_alternative<AlwaysClock>(clock)) return true;
  if (std::holds_alternative<ModuloClock>(clock)) {
    const auto& m = std::get<ModuloClock>(clock);
    if (m.rate < 1) throw std::invalid_argument("clock_fires: rate must be >= 1");
    int r = (t - m.phase) % m.rate;
    if (r < 0) r += m.rate;
    return r == 0;
  }
  if (std::holds_alternative<ThresholdClock>(clock)) {
    const auto& th = std::get<ThresholdClock>(clock);
    if (!signal)
      throw std::invalid_argument("clock_fires: threshold clock needs a signal");
    if (*signal < 0.0 || *signal > 1.0)
      throw std::invalid_argument("clock_fires: signal must be in [0,1]");
    return *signal > th.theta;
  }
  const auto& e = std::get<ExternalClock>(clock);
  return t >= 0 && t < static_cast<int>(e.mask.size()) && e.mask[t];
}

// ---------------------------------------------------------------------------
// Recurrent instantiations (SRN, clock RN) at toy vector scale.
//
// Hidden update: fired modules compute f_T(W_H y + W_I x) on their dims,
// unfired modules persist their previous state; the output applies f_O to the
// hidden transition of fired modules and persists elsewhere.

struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> v;

  DenseMatrix() = default;
  DenseMatrix(int r, int c, float fill = 0.0f)
      : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

  float& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  std::vector<float> mul(const std::vector<float>& x) const {
    if (static_cast<int>(x.size()) != cols)
      throw std::invalid_argument("DenseMatrix: dim mismatch");
    std::vector<float> y(rows, 0.0f);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) y[r] += at(r, c) * x[c];
    return y;
  }
};

enum class RecurrentKind { Srn, ClockRn };

struct RecurrentConfig {
  RecurrentKind kind = RecurrentKind::Srn;
  int dim = 0;        // hidden dimension, split evenly across modules
  int input_dim = 0;
  DenseMatrix w_input;   // dim x input_dim
  DenseMatrix w_hidden;  // dim x dim
  std::vector<Clock> module_clocks;  // shared input/hidden/output clock per module
};

struct RecurrentState {
  int t = 0;
  std::vector<float> hidden;
  std::vector<float> output;
};

inline RecurrentState make_recurrent_state(const RecurrentConfig& cfg) {
  RecurrentState s;
  s.hidden.assign(cfg.dim, 0.0f);
  s.output.assign(cfg.dim, 0.0f);
  return s;
}

inline RecurrentConfig make_srn_config(int dim, int input_dim, DenseMatrix w_input,
                                       DenseMatrix w_hidden) {
  if (w_input.rows != dim || w_input.cols != input_dim || w_hidden.rows != dim ||
      w_hidden.cols != dim)
    throw std::invalid_argument("make_srn_config: weight dims mismatch");
  RecurrentConfig cfg;
  cfg.kind = RecurrentKind::Srn;
  cfg.dim = dim;
  cfg.input_dim = input_dim;
  cfg.w_input = std::move(w_input);
  cfg.w_hidden = std::move(w_hidden);
  cfg.module_clocks = {AlwaysClock{}};
  return cfg;
}

// module_rates must be strictly increasing powers of two (1, 2, 4, ...).
inline RecurrentConfig make_clockrn_config(int dim, int input_dim,
                                           DenseMatrix w_input,
                                           DenseMatrix w_hidden,
                                           const std::vector<int>& module_rates) {
  if (module_rates.empty())
    throw std::invalid_argument("make_clockrn_config: need >= 1 module");
  if (dim % static_cast<int>(module_rates.size()) != 0)
    throw std::invalid_argument("make_clockrn_config: dim must split evenly");
  int prev = 0;
  for (int r : module_rates) {
    if (r < 1 || (r & (r - 1)) != 0)
      throw std::invalid_argument("make_clockrn_config: rates must be powers of two");
    if (r <= prev)
      throw std::invalid_argument("make_clockrn_config: rates must strictly increase");
    prev = r;
  }
  RecurrentConfig cfg = make_srn_config(dim, input_dim, std::move(w_input),
                                        std::move(w_hidden));
  cfg.kind = RecurrentKind::ClockRn;
  cfg.module_clocks.clear();
  for (int r : module_rates) cfg.module_clocks.push_back(ModuloClock{r, 0});
  return cfg;
}

inline void recurrent_step(const RecurrentConfig& cfg, RecurrentState& state,
                           const std::vector<float>& x) {
  if (static_cast<int>(x.size()) != cfg.input_dim)
    throw std::invalid_argument("recurrent_step: input dim mismatch");
  if (static_cast<int>(state.hidden.size()) != cfg.dim)
    throw std::invalid_argument("recurrent_step: state dim mismatch");
  int n_modules = static_cast<int>(cfg.module_clocks.size());
  int span = cfg.dim / n_modules;
  std::vector<float> wh = cfg.w_hidden.mul(state.hidden);
  std::vector<float> wi = cfg.w_input.mul(x);
  std::vector<float> hidden = state.hidden;
  for (int m = 0; m < n_modules; ++m) {
    if (!clock_fires(cfg.module_clocks[m], state.t)) continue;
    for (int d = m * span; d < (m + 1) * span; ++d)
      hidden[d] = std::tanh(wh[d] + wi[d]);
  }
  std::vector<float> wh_new = cfg.w_hidden.mul(hidden);
  for (int m = 0; m < n_modules; ++m) {
    if (!clock_fires(cfg.module_clocks[m], state.t)) continue;
    for (int d = m * span; d < (m + 1) * span; ++d)
      state.output[d] = std::tanh(wh_new[d]);
  }
  state.hidden = std::move(hidden);
  state.t += 1;
}

// ---------------------------------------------------------------------------
// Clock FCN: per-stage input clocks with implicit complementary hidden clocks
// (compute or cache, never a blend) and an all-ones output clock that fuses
// cached stage scores on every frame.

struct FcnClockworkConfig {
  const StageModel* net = nullptr;
  std::vector<Clock> input_clocks;            // C_I per stage
  std::vector<std::optional<Clock>> hidden_clocks;  // explicit C_H; default = complement
};

struct FcnClockworkState {
  int t = 0;
  std::vector<Tensor> features;
  std::vector<Tensor> scores;
  std::vector<int> last_update;  // frame index that produced each cache entry
};

inline FcnClockworkConfig make_clockfcn_config(const StageModel& net,
                                               std::vector<Clock> clocks) {
  if (static_cast<int>(clocks.size()) != net.stage_count())
    throw std::invalid_argument("make_clockfcn_config: one clock per stage");
  FcnClockworkConfig cfg;
  cfg.net = &net;
  cfg.input_clocks = std::move(clocks);
  cfg.hidden_clocks.assign(cfg.input_clocks.size(), std::nullopt);
  return cfg;
}

inline FcnClockworkState make_fcn_state(const FcnClockworkConfig& cfg) {
  FcnClockworkState s;
  int n = cfg.net->stage_count();
  s.features.resize(n);
  s.scores.resize(n);
  s.last_update.assign(n, -1);
  return s;
}

// One frame step of the clock FCN given a precomputed fire decision per stage.
// Frame 0 always executes every stage; uninitialized caches cannot be fused.
inline Tensor fcn_step_masked(const FcnClockworkConfig& cfg,
                              FcnClockworkState& state, const Tensor& frame,
                              const std::vector<bool>& fire) {
  const StageModel& net = *cfg.net;
  int n = net.stage_count();
  if (static_cast<int>(fire.size()) != n)
    throw std::invalid_argument("fcn_step_masked: fire mask size mismatch");
  for (int k = 0; k < n; ++k) {
    bool f = state.t == 0 ? true : fire[k];
    if (cfg.hidden_clocks[k]) {
      bool hidden_fires = clock_fires(*cfg.hidden_clocks[k], state.t);
      if (f && hidden_fires)
        throw std::invalid_argument(
            "fcn_step_masked: input and hidden clocks both fire; clock FCN "
            "modules compute or cache exclusively");
    }
    if (f) {
      StageOutput out = net.forward_stage(k, k == 0 ? frame : state.features[k - 1]);
      state.features[k] = std::move(out.features);
      state.scores[k] = std::move(out.score);
      state.last_update[k] = state.t;
    } else if (state.last_update[k] < 0) {
      throw std::runtime_error("fcn_step_masked: stage cache never initialized");
    }
  }
  std::vector<const Tensor*> ptrs;
  for (const auto& s : state.scores) ptrs.push_back(&s);
  Tensor fused = fuse_scores(ptrs, frame.height, frame.width);
  state.t += 1;
  return fused;
}

// Fire decisions from the configured clocks; threshold clocks consume the
// supplied signal.
inline Tensor fcn_step(const FcnClockworkConfig& cfg, FcnClockworkState& state,
                       const Tensor& frame,
                       std::optional<double> signal = std::nullopt) {
  std::vector<bool> fire(cfg.input_clocks.size());
  for (size_t k = 0; k < cfg.input_clocks.size(); ++k)
    fire[k] = clock_fires(cfg.input_clocks[k], state.t, signal);
  return fcn_step_masked(cfg, state, frame, fire);
}

}  // namespace cwk
