#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <thread>

#include "cwk/data.hpp"
#include "cwk/profile.hpp"
#include "cwk/schedules.hpp"

namespace cwk {

// CWK_THREADS caps per-sequence parallelism; unset or 0 means one worker per
// hardware thread.
inline size_t thread_cap() {
  size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("CWK_THREADS");
  if (!env || !*env) return hw;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 0)
    throw std::invalid_argument("CWK_THREADS must be a nonnegative integer");
  return v == 0 ? hw : static_cast<size_t>(v);
}

struct ScheduleSpec {
  std::string name;  // oracle | truncated | pipeline | fixed_rate | adaptive
  int k = 1;         // truncated / pipeline stage count
  std::vector<int> rates;
  double theta = 0.25;
  int source_stage = 1;
  bool compare_last_update = false;
};

struct ExperimentConfig {
  std::string preset = "clockfcn";  // srn | clockrn | clockfcn
  ScheduleSpec schedule;
  CostModel cost;
  bool cost_given = false;
  nlohmann::json network;
  std::vector<std::string> sequences;
  std::string out_json;
  std::string out_csv;
  uint32_t seed = 0;
  int boundary_radius = 10;
};

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.preset = j.value("preset", std::string("clockfcn"));
  if (cfg.preset != "srn" && cfg.preset != "clockrn" && cfg.preset != "clockfcn")
    throw std::invalid_argument("config: preset must be srn, clockrn or clockfcn");
  if (j.contains("schedule")) {
    const auto& js = j.at("schedule");
    cfg.schedule.name = js.at("name").get<std::string>();
    cfg.schedule.k = js.value("k", cfg.schedule.name == "pipeline" ? 3 : 1);
    if (js.contains("rates"))
      cfg.schedule.rates = js.at("rates").get<std::vector<int>>();
    cfg.schedule.theta = js.value("theta", 0.25);
    cfg.schedule.source_stage = js.value("source_stage", 1);
    cfg.schedule.compare_last_update = js.value("compare_last_update", false);
    static const char* names[] = {"oracle", "truncated", "pipeline", "fixed_rate",
                                  "adaptive"};
    if (std::find(std::begin(names), std::end(names), cfg.schedule.name) ==
        std::end(names))
      throw std::invalid_argument("config: unknown schedule " + cfg.schedule.name);
  }
  if (j.contains("cost_model")) {
    cfg.cost.stage_cost = j.at("cost_model").at("stage_cost").get<std::vector<double>>();
    cfg.cost.fusion_cost = j.at("cost_model").at("fusion_cost").get<double>();
    cfg.cost.validate();
    cfg.cost_given = true;
  }
  cfg.network = j.value("network", nlohmann::json{{"kind", "procedural"},
                                                  {"n_cl", 8},
                                                  {"factors", {2, 4, 8}}});
  if (j.contains("data"))
    cfg.sequences = j.at("data").at("sequences").get<std::vector<std::string>>();
  std::sort(cfg.sequences.begin(), cfg.sequences.end());
  if (j.contains("output")) {
    cfg.out_json = j.at("output").value("json", std::string());
    cfg.out_csv = j.at("output").value("csv", std::string());
  }
  cfg.seed = j.value("seed", 0u);
  cfg.boundary_radius = j.value("boundary_radius", 10);
  return cfg;
}

inline std::unique_ptr<StageModel> build_model(const nlohmann::json& network) {
  std::string kind = network.value("kind", std::string("procedural"));
  if (kind == "procedural") {
    int n_cl = network.value("n_cl", 8);
    std::vector<int> factors =
        network.value("factors", std::vector<int>{2, 4, 8});
    return make_procedural_segmenter(n_cl, std::move(factors));
  }
  if (kind == "toyfcn") {
    ToyArchSpec spec;
    spec.in_channels = network.value("in_channels", 3);
    spec.n_cl = network.value("n_cl", 8);
    spec.stage_channels = network.value("stage_channels", std::vector<int>{8, 16, 32});
    return std::make_unique<StagedNetwork>(
        init_weights(spec, network.value("seed", 0u)));
  }
  if (kind == "weights")
    return std::make_unique<StagedNetwork>(load_weights(network.at("path").get<std::string>()));
  throw std::invalid_argument("config: unknown network kind " + kind);
}

inline RunReport run_schedule(const StageModel& model, const ScheduleSpec& s,
                              const std::vector<Tensor>& frames,
                              const CostModel& cost) {
  if (s.name == "oracle") return run_oracle(model, frames, cost);
  if (s.name == "truncated") return run_truncated(model, frames, s.k, cost);
  if (s.name == "pipeline") return run_pipeline(model, frames, s.k, cost);
  if (s.name == "fixed_rate") return run_fixed_rate(model, frames, s.rates, cost);
  if (s.name == "adaptive")
    return run_adaptive(model, frames, s.theta, s.source_stage, cost,
                        s.compare_last_update);
  throw std::invalid_argument("run_schedule: unknown schedule " + s.name);
}

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

struct SequenceResult {
  std::string name;
  RunReport report;
  ConfusionMatrix confusion;
  ConfusionMatrix confusion_band;
  std::vector<double> frame_mean_iu;
};

struct ExperimentResult {
  std::vector<SequenceResult> sequences;
  double mean_iu = 0.0;
  double fw_iu = 0.0;
  double mean_iu_band = 0.0;
  double fw_iu_band = 0.0;
  double compute_fraction = 0.0;
  double latency = 0.0;
  double latency_paper = 0.0;
  double full_frame_fraction = 0.0;
};

// Runs one schedule over every sequence and aggregates metrics by merging
// per-frame confusion matrices. Sequences are processed in name order so
// outputs are deterministic.
inline ExperimentResult run_experiment_on(
    const StageModel& base_model, const ScheduleSpec& schedule,
    const std::vector<std::pair<std::string, LabeledSequence>>& data,
    CostModel cost, bool cost_given, int boundary_radius) {
  if (data.empty()) throw std::invalid_argument("run_experiment: no sequences");
  int n_cl = data[0].second.n_cl;
  const StageModel* model = &base_model;
  std::unique_ptr<StageModel> merged;
  if (schedule.name == "pipeline" && schedule.k == 2 &&
      base_model.stage_count() == 3) {
    merged = base_model.two_stage_variant();
    model = merged.get();
  }
  if (!cost_given) cost = CostModel::paper_default(model->stage_count());
  ExperimentResult result;
  ConfusionMatrix total(n_cl), total_band(n_cl);
  double frac_sum = 0.0, full_sum = 0.0;
  std::vector<SequenceResult> partial(data.size());
  auto process = [&](size_t i) {
    const auto& [name, seq] = data[i];
    SequenceResult sr;
    sr.name = name;
    sr.report = run_schedule(*model, schedule, seq.frames, cost);
    sr.confusion = ConfusionMatrix(n_cl);
    sr.confusion_band = ConfusionMatrix(n_cl);
    for (size_t t = 0; t < seq.frames.size(); ++t) {
      ConfusionMatrix cm =
          accumulate_confusion(sr.report.outputs[t], seq.labels[t], n_cl);
      sr.frame_mean_iu.push_back(mean_iu(cm));
      sr.confusion.merge(cm);
      auto band = boundary_band_mask(seq.labels[t], boundary_radius);
      sr.confusion_band.merge(accumulate_confusion(
          sr.report.outputs[t], apply_band(seq.labels[t], band), n_cl));
    }
    partial[i] = std::move(sr);
  };
  size_t n_workers = std::min<size_t>(thread_cap(), data.size());
  if (n_workers <= 1) {
    for (size_t i = 0; i < data.size(); ++i) process(i);
  } else {
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (size_t w = 0; w < n_workers; ++w)
      workers.emplace_back([&] {
        for (size_t i = next++; i < data.size(); i = next++) {
          try {
            process(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
  }
  // merge in name order so aggregates and reports are deterministic
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return data[a].first < data[b].first;
  });
  for (size_t i : order) {
    SequenceResult& sr = partial[i];
    total.merge(sr.confusion);
    total_band.merge(sr.confusion_band);
    frac_sum += sr.report.compute_fraction;
    full_sum += sr.report.full_frame_fraction;
    result.latency = sr.report.latency;
    result.latency_paper = sr.report.latency_paper;
    result.sequences.push_back(std::move(sr));
  }
  result.mean_iu = mean_iu(total);
  result.fw_iu = cwk::fw_iu(total);
  if (total_band.total() > 0) {
    result.mean_iu_band = mean_iu(total_band);
    result.fw_iu_band = cwk::fw_iu(total_band);
  }
  result.compute_fraction = frac_sum / static_cast<double>(data.size());
  result.full_frame_fraction = full_sum / static_cast<double>(data.size());
  return result;
}

inline std::vector<std::pair<std::string, LabeledSequence>> load_sequences(
    const std::vector<std::string>& dirs) {
  std::vector<std::pair<std::string, LabeledSequence>> data;
  for (const auto& d : dirs) data.emplace_back(d, read_sequence(d));
  return data;
}

inline void write_run_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "sequence,frame,executed,cost,signal,mean_iu\n";
  for (const auto& sr : result.sequences) {
    for (size_t t = 0; t < sr.report.outputs.size(); ++t) {
      std::string mask;
      for (uint8_t e : sr.report.executed[t]) mask += e ? '1' : '0';
      os << sr.name << ',' << t << ',' << mask << ','
         << detail::fmt(sr.report.frame_cost[t]) << ','
         << detail::fmt(sr.report.signals[t]) << ','
         << detail::fmt(sr.frame_mean_iu[t]) << '\n';
    }
  }
}

inline nlohmann::json result_to_json(const ScheduleSpec& schedule,
                                     const ExperimentResult& result) {
  nlohmann::json j;
  j["schedule"] = schedule.name;
  j["mean_iu"] = result.mean_iu;
  j["fw_iu"] = result.fw_iu;
  j["mean_iu_boundary"] = result.mean_iu_band;
  j["fw_iu_boundary"] = result.fw_iu_band;
  j["compute_fraction"] = result.compute_fraction;
  j["latency"] = result.latency;
  j["latency_paper"] = result.latency_paper;
  j["full_frame_fraction"] = result.full_frame_fraction;
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& sr : result.sequences) {
    seqs.push_back({{"name", sr.name},
                    {"mean_iu", mean_iu(sr.confusion)},
                    {"fw_iu", fw_iu(sr.confusion)},
                    {"compute_fraction", sr.report.compute_fraction},
                    {"full_frame_fraction", sr.report.full_frame_fraction}});
  }
  j["sequences"] = seqs;
  j["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  return j;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  auto model = build_model(cfg.network);
  auto data = load_sequences(cfg.sequences);
  ExperimentResult result =
      run_experiment_on(*model, cfg.schedule, data, cfg.cost, cfg.cost_given,
                        cfg.boundary_radius);
  if (!cfg.out_csv.empty()) write_run_csv(result, cfg.out_csv);
  if (!cfg.out_json.empty()) {
    std::ofstream os(cfg.out_json);
    if (!os) throw std::runtime_error("cannot open " + cfg.out_json);
    os << result_to_json(cfg.schedule, result).dump(2) << "\n";
  }
  return result;
}

// ---------------------------------------------------------------------------
// Threshold sweep and bisection

struct SweepRow {
  double theta = 0.0;
  double full_frame_fraction = 0.0;
  double mean_iu = 0.0;
  double fw_iu = 0.0;
  double compute_fraction = 0.0;
};

inline SweepRow sweep_point(const StageModel& model, ScheduleSpec schedule,
                            const std::vector<std::pair<std::string, LabeledSequence>>& data,
                            const CostModel& cost, bool cost_given,
                            int boundary_radius, double theta) {
  schedule.name = "adaptive";
  schedule.theta = theta;
  ExperimentResult r = run_experiment_on(model, schedule, data, cost, cost_given,
                                         boundary_radius);
  return {theta, r.full_frame_fraction, r.mean_iu, r.fw_iu, r.compute_fraction};
}

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                       const std::vector<double>& thetas) {
  auto model = build_model(cfg.network);
  auto data = load_sequences(cfg.sequences);
  std::vector<SweepRow> rows;
  for (double th : thetas)
    rows.push_back(sweep_point(*model, cfg.schedule, data, cfg.cost,
                               cfg.cost_given, cfg.boundary_radius, th));
  return rows;
}

struct BisectResult {
  bool feasible = false;
  SweepRow row;
  int iterations = 0;
};

// full_frame_fraction is nonincreasing in theta, so bisection on theta finds a
// threshold hitting the target fraction when one exists.
inline BisectResult bisect_theta(const ExperimentConfig& cfg, double target,
                                 double tol = 0.05, int max_iter = 20) {
  auto model = build_model(cfg.network);
  auto data = load_sequences(cfg.sequences);
  auto point = [&](double th) {
    return sweep_point(*model, cfg.schedule, data, cfg.cost, cfg.cost_given,
                       cfg.boundary_radius, th);
  };
  BisectResult out;
  double lo = 0.0, hi = 1.0;
  SweepRow lo_row = point(lo), hi_row = point(hi);
  if (std::abs(lo_row.full_frame_fraction - target) <= tol) {
    out.feasible = true;
    out.row = lo_row;
    return out;
  }
  if (std::abs(hi_row.full_frame_fraction - target) <= tol) {
    out.feasible = true;
    out.row = hi_row;
    return out;
  }
  if (lo_row.full_frame_fraction < target || hi_row.full_frame_fraction > target)
    return out;  // target outside the attainable range
  for (int i = 0; i < max_iter; ++i) {
    double mid = 0.5 * (lo + hi);
    SweepRow row = point(mid);
    ++out.iterations;
    if (std::abs(row.full_frame_fraction - target) <= tol) {
      out.feasible = true;
      out.row = row;
      return out;
    }
    if (row.full_frame_fraction > target)
      lo = mid;
    else
      hi = mid;
  }
  return out;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows,
                            const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "theta,full_frame_fraction,mean_iu,fw_iu,compute_fraction\n";
  for (const auto& r : rows)
    os << detail::fmt(r.theta) << ',' << detail::fmt(r.full_frame_fraction) << ','
       << detail::fmt(r.mean_iu) << ',' << detail::fmt(r.fw_iu) << ','
       << detail::fmt(r.compute_fraction) << '\n';
}

// ---------------------------------------------------------------------------
// Temporal-difference profiling across sequences

struct ProfileRow {
  std::string layer;
  double mean = 0.0;
  double stdev = 0.0;
  std::vector<double> series;  // pooled across sequences, in name order
};

inline std::vector<ProfileRow> run_profile(const ExperimentConfig& cfg) {
  auto model = build_model(cfg.network);
  auto data = load_sequences(cfg.sequences);
  if (data.empty()) throw std::invalid_argument("run_profile: no sequences");
  std::vector<ProfileRow> rows(model->stage_count() + 1);
  rows[0].layer = "pixels";
  for (int k = 0; k < model->stage_count(); ++k)
    rows[k + 1].layer = "stage" + std::to_string(k);
  for (const auto& [name, seq] : data) {
    TemporalProfile p = temporal_difference_profile(*model, seq.frames);
    rows[0].series.insert(rows[0].series.end(), p.pixels.series.begin(),
                          p.pixels.series.end());
    for (int k = 0; k < model->stage_count(); ++k)
      rows[k + 1].series.insert(rows[k + 1].series.end(),
                                p.stages[k].series.begin(),
                                p.stages[k].series.end());
  }
  for (auto& r : rows) {
    SeriesStats s = series_stats(r.series);
    r.mean = s.mean;
    r.stdev = s.stdev;
  }
  return rows;
}

inline void write_profile_csv(const std::vector<ProfileRow>& rows,
                              const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "layer,mean,stdev,series_file\n";
  for (const auto& r : rows) {
    std::string series_path = path + "." + r.layer + ".csv";
    os << r.layer << ',' << detail::fmt(r.mean) << ',' << detail::fmt(r.stdev)
       << ',' << series_path << '\n';
    std::ofstream ss(series_path);
    ss << "index,d_sm\n";
    for (size_t i = 0; i < r.series.size(); ++i)
      ss << i << ',' << detail::fmt(r.series[i]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Recurrent preset demo runs (srn / clockrn)

inline void run_recurrent_demo(const ExperimentConfig& cfg, int n_steps,
                               const std::string& csv_path) {
  int dim = cfg.network.value("dim", 4);
  std::mt19937 rng(cfg.seed);
  std::uniform_real_distribution<float> dist(-0.5f, 0.5f);
  DenseMatrix w_in(dim, 1), w_h(dim, dim);
  for (auto& v : w_in.v) v = dist(rng);
  for (auto& v : w_h.v) v = dist(rng);
  RecurrentConfig rc =
      cfg.preset == "srn"
          ? make_srn_config(dim, 1, w_in, w_h)
          : make_clockrn_config(dim, 1, w_in, w_h,
                                cfg.network.value("rates", std::vector<int>{1, 2}));
  RecurrentState state = make_recurrent_state(rc);
  std::ofstream os(csv_path);
  if (!os) throw std::runtime_error("cannot open " + csv_path);
  os << "t";
  for (int d = 0; d < dim; ++d) os << ",h" << d;
  for (int d = 0; d < dim; ++d) os << ",o" << d;
  os << "\n";
  for (int t = 0; t < n_steps; ++t) {
    recurrent_step(rc, state, {std::sin(0.3f * static_cast<float>(t))});
    os << t;
    for (float v : state.hidden) os << ',' << detail::fmt(v);
    for (float v : state.output) os << ',' << detail::fmt(v);
    os << "\n";
  }
}

}  // namespace cwk
