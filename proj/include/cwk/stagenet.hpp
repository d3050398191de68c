#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <variant>

#include <nlohmann/json.hpp>

#include "cwk/palette.hpp"
#include "cwk/tensorops.hpp"

namespace cwk {

struct StageOutput {
  Tensor features;
  Tensor score;
};

// A staged segmenter: each stage maps its input (the frame for stage 0, the
// previous stage's features otherwise) to features plus an n_cl-channel score
// map at that stage's resolution.
class StageModel {
 public:
  virtual ~StageModel() = default;
  virtual int stage_count() const = 0;
  virtual int class_count() const = 0;
  virtual int input_channels() const = 0;
  // total downsampling of stage k's score map relative to the input frame
  virtual int downsample_factor(int k) const = 0;
  virtual StageOutput forward_stage(int k, const Tensor& input) const = 0;
  // merged 2-stage variant: the first pipeline stage runs through the second
  // score head, the last stage is unchanged
  virtual std::unique_ptr<StageModel> two_stage_variant() const = 0;
};

// Upsample each stage score to frame resolution and sum.
inline Tensor fuse_scores(const std::vector<const Tensor*>& scores, int frame_h,
                          int frame_w) {
  if (scores.empty()) throw std::invalid_argument("fuse_scores: no stage scores");
  Tensor fused;
  for (const Tensor* s : scores) {
    if (s == nullptr)
      throw std::invalid_argument("fuse_scores: missing stage score");
    if (s->height < 1 || frame_h % s->height != 0 || frame_w % s->width != 0 ||
        frame_h / s->height != frame_w / s->width)
      throw std::invalid_argument("fuse_scores: score dims incompatible with frame");
    Tensor up = upsample_bilinear(*s, frame_h / s->height);
    fused = fused.data.empty() ? std::move(up) : add(fused, up);
  }
  return fused;
}

struct ForwardResult {
  std::vector<Tensor> features;
  std::vector<Tensor> scores;
  Tensor fused;
};

// Sequential execution of every stage plus fusion; the accuracy reference.
inline ForwardResult full_forward(const StageModel& net, const Tensor& frame) {
  ForwardResult r;
  const Tensor* input = &frame;
  for (int k = 0; k < net.stage_count(); ++k) {
    StageOutput out = net.forward_stage(k, *input);
    r.features.push_back(std::move(out.features));
    r.scores.push_back(std::move(out.score));
    input = &r.features.back();
  }
  std::vector<const Tensor*> ptrs;
  for (const auto& s : r.scores) ptrs.push_back(&s);
  r.fused = fuse_scores(ptrs, frame.height, frame.width);
  return r;
}

// ---------------------------------------------------------------------------
// Toy convolutional staged network

struct ConvOp {
  ConvWeights w;
  int stride = 1;
  int pad = 0;
};
struct ReluOp {};
struct PoolOp {
  int window = 2;
  int stride = 2;
};
using FeatureOp = std::variant<ConvOp, ReluOp, PoolOp>;

struct StageSpec {
  std::vector<FeatureOp> feature_ops;
  ConvWeights score_head;  // 1x1 conv to n_cl channels
  int downsample_factor = 1;
};

class StagedNetwork : public StageModel {
 public:
  std::vector<StageSpec> stages;
  int n_cl = 0;
  int in_channels = 0;

  int stage_count() const override { return static_cast<int>(stages.size()); }
  int class_count() const override { return n_cl; }
  int input_channels() const override { return in_channels; }
  int downsample_factor(int k) const override {
    return stages.at(k).downsample_factor;
  }

  StageOutput forward_stage(int k, const Tensor& input) const override {
    const StageSpec& s = stages.at(k);
    Tensor feat = input;
    for (const auto& op : s.feature_ops) {
      if (std::holds_alternative<ConvOp>(op)) {
        const auto& c = std::get<ConvOp>(op);
        feat = conv2d(feat, c.w, c.stride, c.pad);
      } else if (std::holds_alternative<ReluOp>(op)) {
        feat = relu(feat);
      } else {
        const auto& p = std::get<PoolOp>(op);
        feat = maxpool2d(feat, p.window, p.stride);
      }
    }
    Tensor score = conv2d(feat, s.score_head, 1, 0);
    return {std::move(feat), std::move(score)};
  }

  std::unique_ptr<StageModel> two_stage_variant() const override {
    if (stage_count() != 3)
      throw std::invalid_argument("two_stage_variant: need a 3-stage network");
    auto merged = std::make_unique<StagedNetwork>();
    merged->n_cl = n_cl;
    merged->in_channels = in_channels;
    StageSpec first;
    first.feature_ops = stages[0].feature_ops;
    first.feature_ops.insert(first.feature_ops.end(),
                             stages[1].feature_ops.begin(),
                             stages[1].feature_ops.end());
    first.score_head = stages[1].score_head;
    first.downsample_factor = stages[1].downsample_factor;
    merged->stages.push_back(std::move(first));
    merged->stages.push_back(stages[2]);
    return merged;
  }

  bool operator==(const StagedNetwork& o) const {
    if (n_cl != o.n_cl || in_channels != o.in_channels ||
        stages.size() != o.stages.size())
      return false;
    for (size_t k = 0; k < stages.size(); ++k) {
      const auto& a = stages[k];
      const auto& b = o.stages[k];
      if (a.downsample_factor != b.downsample_factor ||
          !(a.score_head == b.score_head) ||
          a.feature_ops.size() != b.feature_ops.size())
        return false;
      for (size_t i = 0; i < a.feature_ops.size(); ++i) {
        if (a.feature_ops[i].index() != b.feature_ops[i].index()) return false;
        if (std::holds_alternative<ConvOp>(a.feature_ops[i])) {
          const auto& ca = std::get<ConvOp>(a.feature_ops[i]);
          const auto& cb = std::get<ConvOp>(b.feature_ops[i]);
          if (!(ca.w == cb.w) || ca.stride != cb.stride || ca.pad != cb.pad)
            return false;
        } else if (std::holds_alternative<PoolOp>(a.feature_ops[i])) {
          const auto& pa = std::get<PoolOp>(a.feature_ops[i]);
          const auto& pb = std::get<PoolOp>(b.feature_ops[i]);
          if (pa.window != pb.window || pa.stride != pb.stride) return false;
        }
      }
    }
    return true;
  }
};

// Architecture description for weight initialization.
struct ToyArchSpec {
  int in_channels = 3;
  int n_cl = 8;
  std::vector<int> stage_channels = {8, 16, 32};
};

namespace detail {

inline ConvWeights init_conv(int out_c, int in_c, int kh, int kw,
                             std::mt19937& rng) {
  ConvWeights w;
  w.out_c = out_c;
  w.in_c = in_c;
  w.kh = kh;
  w.kw = kw;
  w.w.resize(static_cast<size_t>(out_c) * in_c * kh * kw);
  w.bias.assign(out_c, 0.0f);
  int fan_in = in_c * kh * kw;
  int fan_out = out_c * kh * kw;
  float a = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  std::uniform_real_distribution<float> dist(-a, a);
  for (auto& v : w.w) v = dist(rng);
  return w;
}

}  // namespace detail

// Each stage: conv3x3 -> relu -> conv3x3 -> relu -> maxpool2x2/2, followed by
// a 1x1 score head; cumulative downsample factors 2, 4, 8.
inline StagedNetwork init_weights(const ToyArchSpec& spec, uint32_t seed) {
  if (spec.in_channels < 1 || spec.n_cl < 2 || spec.stage_channels.empty())
    throw std::invalid_argument("init_weights: invalid arch spec");
  std::mt19937 rng(seed);
  StagedNetwork net;
  net.n_cl = spec.n_cl;
  net.in_channels = spec.in_channels;
  int prev_c = spec.in_channels;
  int factor = 1;
  for (int ch : spec.stage_channels) {
    if (ch < 1) throw std::invalid_argument("init_weights: invalid channel count");
    StageSpec s;
    s.feature_ops.push_back(ConvOp{detail::init_conv(ch, prev_c, 3, 3, rng), 1, 1});
    s.feature_ops.push_back(ReluOp{});
    s.feature_ops.push_back(ConvOp{detail::init_conv(ch, ch, 3, 3, rng), 1, 1});
    s.feature_ops.push_back(ReluOp{});
    s.feature_ops.push_back(PoolOp{2, 2});
    s.score_head = detail::init_conv(spec.n_cl, ch, 1, 1, rng);
    factor *= 2;
    s.downsample_factor = factor;
    net.stages.push_back(std::move(s));
    prev_c = ch;
  }
  return net;
}

// ---------------------------------------------------------------------------
// Weight bundle: manifest.json plus one CWKT file per weight tensor.

namespace detail {

inline void save_conv(const ConvWeights& w, const std::filesystem::path& dir,
                      const std::string& name) {
  std::ofstream wf(dir / (name + "_w.cwkt"), std::ios::binary);
  write_f32(wf,
            {static_cast<uint32_t>(w.out_c), static_cast<uint32_t>(w.in_c),
             static_cast<uint32_t>(w.kh), static_cast<uint32_t>(w.kw)},
            w.w);
  std::ofstream bf(dir / (name + "_b.cwkt"), std::ios::binary);
  write_f32(bf, {static_cast<uint32_t>(w.out_c)}, w.bias);
}

inline ConvWeights load_conv(const std::filesystem::path& dir,
                             const std::string& name) {
  ConvWeights w;
  std::ifstream wf(dir / (name + "_w.cwkt"), std::ios::binary);
  if (!wf) throw std::runtime_error("load_weights: missing " + name + "_w.cwkt");
  std::vector<uint32_t> dims;
  w.w = read_f32(wf, dims);
  if (dims.size() != 4) throw std::runtime_error("load_weights: conv needs 4 dims");
  w.out_c = static_cast<int>(dims[0]);
  w.in_c = static_cast<int>(dims[1]);
  w.kh = static_cast<int>(dims[2]);
  w.kw = static_cast<int>(dims[3]);
  std::ifstream bf(dir / (name + "_b.cwkt"), std::ios::binary);
  if (!bf) throw std::runtime_error("load_weights: missing " + name + "_b.cwkt");
  std::vector<uint32_t> bdims;
  w.bias = read_f32(bf, bdims);
  if (bdims.size() != 1 || bdims[0] != static_cast<uint32_t>(w.out_c))
    throw std::runtime_error("load_weights: bias dims mismatch");
  return w;
}

}  // namespace detail

inline void save_weights(const StagedNetwork& net, const std::string& dir_path) {
  namespace fs = std::filesystem;
  fs::path dir(dir_path);
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["n_cl"] = net.n_cl;
  manifest["in_channels"] = net.in_channels;
  manifest["stage_count"] = net.stage_count();
  nlohmann::json jstages = nlohmann::json::array();
  for (int k = 0; k < net.stage_count(); ++k) {
    const auto& s = net.stages[k];
    nlohmann::json js;
    js["downsample_factor"] = s.downsample_factor;
    nlohmann::json jops = nlohmann::json::array();
    for (size_t i = 0; i < s.feature_ops.size(); ++i) {
      const auto& op = s.feature_ops[i];
      nlohmann::json jop;
      if (std::holds_alternative<ConvOp>(op)) {
        const auto& c = std::get<ConvOp>(op);
        jop["type"] = "conv";
        jop["stride"] = c.stride;
        jop["pad"] = c.pad;
        std::string name = "s" + std::to_string(k) + "_op" + std::to_string(i);
        jop["tensor"] = name;
        detail::save_conv(c.w, dir, name);
      } else if (std::holds_alternative<ReluOp>(op)) {
        jop["type"] = "relu";
      } else {
        const auto& p = std::get<PoolOp>(op);
        jop["type"] = "pool";
        jop["window"] = p.window;
        jop["stride"] = p.stride;
      }
      jops.push_back(jop);
    }
    js["ops"] = jops;
    std::string head = "s" + std::to_string(k) + "_head";
    js["head"] = head;
    detail::save_conv(s.score_head, dir, head);
    jstages.push_back(js);
  }
  manifest["stages"] = jstages;
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << "\n";
}

inline StagedNetwork load_weights(const std::string& dir_path) {
  namespace fs = std::filesystem;
  fs::path dir(dir_path);
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("load_weights: missing manifest.json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  StagedNetwork net;
  net.n_cl = manifest.at("n_cl").get<int>();
  net.in_channels = manifest.at("in_channels").get<int>();
  const auto& jstages = manifest.at("stages");
  if (manifest.at("stage_count").get<int>() !=
      static_cast<int>(jstages.size()))
    throw std::runtime_error("load_weights: stage count mismatch");
  for (const auto& js : jstages) {
    StageSpec s;
    s.downsample_factor = js.at("downsample_factor").get<int>();
    for (const auto& jop : js.at("ops")) {
      std::string type = jop.at("type").get<std::string>();
      if (type == "conv") {
        ConvOp c;
        c.stride = jop.at("stride").get<int>();
        c.pad = jop.at("pad").get<int>();
        c.w = detail::load_conv(dir, jop.at("tensor").get<std::string>());
        s.feature_ops.push_back(std::move(c));
      } else if (type == "relu") {
        s.feature_ops.push_back(ReluOp{});
      } else if (type == "pool") {
        s.feature_ops.push_back(PoolOp{jop.at("window").get<int>(),
                                       jop.at("stride").get<int>()});
      } else {
        throw std::runtime_error("load_weights: unknown op type " + type);
      }
    }
    s.score_head = detail::load_conv(dir, js.at("head").get<std::string>());
    if (s.score_head.out_c != net.n_cl)
      throw std::runtime_error("load_weights: score head channels != n_cl");
    net.stages.push_back(std::move(s));
  }
  return net;
}

// ---------------------------------------------------------------------------
// Procedural near-oracle segmenter.
//
// Stage k recovers the true label map of the current input, majority-downsamples
// it to resolution frame/factor_k and emits a score map whose probability mass
// is spread uniformly over the classes grouped together at that stage. Deep
// stages are coarse in space but sharp in semantics (singleton groups); shallow
// stages are fine in space but semantically blurred, mirroring the accuracy
// profile of a staged convnet without any learned weights.

namespace detail {

inline LabelMap majority_downsample(const LabelMap& in, int f, int n_cl) {
  if (in.height % f != 0 || in.width % f != 0)
    throw std::invalid_argument("majority_downsample: dims not divisible");
  LabelMap out(in.height / f, in.width / f);
  std::vector<int> counts(n_cl);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      std::fill(counts.begin(), counts.end(), 0);
      for (int dy = 0; dy < f; ++dy)
        for (int dx = 0; dx < f; ++dx) counts[in.at(y * f + dy, x * f + dx)]++;
      int best = 0;
      for (int c = 1; c < n_cl; ++c)
        if (counts[c] > counts[best]) best = c;  // ties to lowest class
      out.at(y, x) = static_cast<uint8_t>(best);
    }
  return out;
}

}  // namespace detail

class ProceduralSegmenter : public StageModel {
 public:
  // group_of[k][c] = semantic group of class c at stage k
  ProceduralSegmenter(int n_cl, std::vector<int> factors,
                      std::vector<std::vector<int>> group_of)
      : n_cl_(n_cl), factors_(std::move(factors)), group_of_(std::move(group_of)),
        palette_(class_palette(n_cl)) {
    if (factors_.empty())
      throw std::invalid_argument("ProceduralSegmenter: need >= 1 stage");
    for (size_t k = 0; k < factors_.size(); ++k) {
      if (factors_[k] < 1 ||
          (k > 0 && (factors_[k] <= factors_[k - 1] ||
                     factors_[k] % factors_[k - 1] != 0)))
        throw std::invalid_argument(
            "ProceduralSegmenter: factors must strictly increase and nest");
    }
    if (group_of_.size() != factors_.size())
      throw std::invalid_argument("ProceduralSegmenter: one grouping per stage");
    group_sizes_.resize(group_of_.size());
    for (size_t k = 0; k < group_of_.size(); ++k) {
      if (static_cast<int>(group_of_[k].size()) != n_cl_)
        throw std::invalid_argument("ProceduralSegmenter: grouping covers n_cl");
      group_sizes_[k].assign(n_cl_, 0);
      std::vector<int> per_group(n_cl_, 0);
      for (int c = 0; c < n_cl_; ++c) per_group[group_of_[k][c]]++;
      for (int c = 0; c < n_cl_; ++c)
        group_sizes_[k][c] = per_group[group_of_[k][c]];
    }
  }

  int stage_count() const override { return static_cast<int>(factors_.size()); }
  int class_count() const override { return n_cl_; }
  int input_channels() const override { return 3; }
  int downsample_factor(int k) const override { return factors_.at(k); }

  StageOutput forward_stage(int k, const Tensor& input) const override {
    LabelMap labels;
    int f;
    if (k == 0) {
      labels = decode_labels(input);
      f = factors_[0];
    } else {
      labels = features_to_labels(input);
      f = factors_[k] / factors_[k - 1];
    }
    LabelMap down = detail::majority_downsample(labels, f, n_cl_);
    StageOutput out;
    out.features = labels_to_features(down);
    out.score = group_score(down, k);
    return out;
  }

  std::unique_ptr<StageModel> two_stage_variant() const override {
    if (stage_count() != 3)
      throw std::invalid_argument("two_stage_variant: need a 3-stage segmenter");
    return std::make_unique<ProceduralSegmenter>(
        n_cl_, std::vector<int>{factors_[1], factors_[2]},
        std::vector<std::vector<int>>{group_of_[1], group_of_[2]});
  }

  LabelMap decode_labels(const Tensor& frame) const {
    if (frame.channels != 3)
      throw std::invalid_argument("ProceduralSegmenter: expects 3-channel frames");
    LabelMap out(frame.height, frame.width);
    for (int y = 0; y < frame.height; ++y)
      for (int x = 0; x < frame.width; ++x) {
        int best = 0;
        float bd = 0.0f;
        for (int c = 0; c < n_cl_; ++c) {
          float d = 0.0f;
          for (int ch = 0; ch < 3; ++ch) {
            float e = frame.at(ch, y, x) - palette_[c][ch];
            d += e * e;
          }
          if (c == 0 || d < bd) {
            bd = d;
            best = c;
          }
        }
        out.at(y, x) = static_cast<uint8_t>(best);
      }
    return out;
  }

 private:
  Tensor labels_to_features(const LabelMap& m) const {
    Tensor t(1, m.height, m.width);
    for (size_t i = 0; i < m.labels.size(); ++i)
      t.data[i] = static_cast<float>(m.labels[i]);
    return t;
  }

  LabelMap features_to_labels(const Tensor& t) const {
    if (t.channels != 1)
      throw std::invalid_argument("ProceduralSegmenter: stage input must be 1-channel");
    LabelMap m(t.height, t.width);
    for (size_t i = 0; i < m.labels.size(); ++i)
      m.labels[i] = static_cast<uint8_t>(t.data[i]);
    return m;
  }

  Tensor group_score(const LabelMap& m, int k) const {
    Tensor score(n_cl_, m.height, m.width);
    // The deepest stage scores below the pair weight 0.5 so its exact but
    // potentially stale and blocky vote breaks ties between fresher coarse
    // stages instead of overriding them.
    float w = (k + 1 == stage_count()) ? 0.4f : 1.0f;
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x) {
        int c = m.at(y, x);
        int g = group_of_[k][c];
        float v = w / static_cast<float>(group_sizes_[k][c]);
        for (int cc = 0; cc < n_cl_; ++cc)
          if (group_of_[k][cc] == g) score.at(cc, y, x) = v;
      }
    return score;
  }

  int n_cl_;
  std::vector<int> factors_;
  std::vector<std::vector<int>> group_of_;
  std::vector<std::vector<int>> group_sizes_;
  std::vector<std::array<float, 3>> palette_;
};

// Default semantic ladder: the shallowest stage only separates background from
// foreground, the middle stage resolves foreground classes in pairs, the
// deepest stage is exact. For 2 stages the ladder drops its first rung.
inline std::vector<std::vector<int>> default_stage_groups(int n_cl,
                                                          int n_stages) {
  auto singleton = [&] {
    std::vector<int> g(n_cl);
    for (int c = 0; c < n_cl; ++c) g[c] = c;
    return g;
  };
  auto pairs = [&] {
    std::vector<int> g(n_cl);
    g[0] = 0;  // background stays its own group
    for (int c = 1; c < n_cl; ++c) g[c] = 1 + (c - 1) / 2;
    return g;
  };
  auto fg_bg = [&] {
    std::vector<int> g(n_cl, 1);
    g[0] = 0;
    return g;
  };
  if (n_stages == 3) return {fg_bg(), pairs(), singleton()};
  if (n_stages == 2) return {pairs(), singleton()};
  if (n_stages == 1) return {singleton()};
  throw std::invalid_argument("default_stage_groups: 1..3 stages supported");
}

inline std::unique_ptr<ProceduralSegmenter> make_procedural_segmenter(
    int n_cl, std::vector<int> factors) {
  auto groups = default_stage_groups(n_cl, static_cast<int>(factors.size()));
  return std::make_unique<ProceduralSegmenter>(n_cl, std::move(factors),
                                               std::move(groups));
}

}  // namespace cwk
