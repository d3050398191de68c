#pragma once

#include <filesystem>
#include <random>

#include <nlohmann/json.hpp>

#include "cwk/palette.hpp"
#include "cwk/tensor.hpp"

namespace cwk {

struct LabeledSequence {
  std::vector<Tensor> frames;
  std::vector<LabelMap> labels;
  int n_cl = 0;
  nlohmann::json provenance;
};

enum class Orientation { Horizontal, Vertical, AutoByAspect };

struct TranslatedSpec {
  int displacement = 2;
  int n_frames = 6;
  int crop_height = 32;
  int crop_width = 32;
  Orientation orientation = Orientation::AutoByAspect;
};

// Frame t is the crop at offset t * displacement along the motion axis; a pure
// crop, so consecutive frames agree exactly on their overlap.
inline LabeledSequence generate_translated_sequence(const Tensor& image,
                                                    const LabelMap& labels,
                                                    const TranslatedSpec& spec,
                                                    int n_cl) {
  if (image.height != labels.height || image.width != labels.width)
    throw std::invalid_argument("generate_translated_sequence: image/label dims differ");
  if (spec.n_frames < 1 || spec.displacement < 0)
    throw std::invalid_argument("generate_translated_sequence: bad spec");
  bool horizontal = spec.orientation == Orientation::Horizontal ||
                    (spec.orientation == Orientation::AutoByAspect &&
                     image.width >= image.height);
  int travel = (spec.n_frames - 1) * spec.displacement;
  int span_limit = horizontal ? image.width - spec.crop_width
                              : image.height - spec.crop_height;
  if (spec.crop_height > image.height || spec.crop_width > image.width ||
      travel > span_limit) {
    int max_frames = spec.displacement > 0 ? span_limit / spec.displacement + 1 : 0;
    throw std::invalid_argument(
        "generate_translated_sequence: crop window exits source bounds "
        "(max feasible n_frames = " +
        std::to_string(std::max(max_frames, 0)) + ")");
  }
  LabeledSequence seq;
  seq.n_cl = n_cl;
  for (int t = 0; t < spec.n_frames; ++t) {
    int ox = horizontal ? t * spec.displacement : 0;
    int oy = horizontal ? 0 : t * spec.displacement;
    Tensor frame(image.channels, spec.crop_height, spec.crop_width);
    LabelMap lab(spec.crop_height, spec.crop_width);
    for (int y = 0; y < spec.crop_height; ++y)
      for (int x = 0; x < spec.crop_width; ++x) {
        for (int c = 0; c < image.channels; ++c)
          frame.at(c, y, x) = image.at(c, oy + y, ox + x);
        lab.at(y, x) = labels.at(oy + y, ox + x);
      }
    seq.frames.push_back(std::move(frame));
    seq.labels.push_back(std::move(lab));
  }
  seq.provenance = {{"kind", "translated"},
                    {"displacement", spec.displacement},
                    {"n_frames", spec.n_frames},
                    {"axis", horizontal ? "horizontal" : "vertical"}};
  return seq;
}

struct ProceduralParams {
  int n_cl = 8;
  int height = 32;
  int width = 32;
  int n_shapes = 4;
  int min_size = 3;   // half-extent in pixels
  int max_size = 6;
  int min_speed = 0;  // per-axis velocity magnitude bound
  int max_speed = 2;
  int n_frames = 6;
  float noise_amplitude = 0.02f;
};

// Moving rectangles and disks over a background, later shapes occluding
// earlier ones; frames render per-class palette colors plus seeded noise and
// labels are exact.
inline LabeledSequence generate_procedural_scene(uint32_t seed,
                                                 const ProceduralParams& p) {
  if (p.n_shapes < 1 || p.n_frames < 1 || p.n_cl < 2 || p.height < 4 || p.width < 4)
    throw std::invalid_argument("generate_procedural_scene: invalid params");
  if (p.min_size < 1 || p.max_size < p.min_size || p.max_speed < p.min_speed ||
      p.min_speed < 0)
    throw std::invalid_argument("generate_procedural_scene: invalid shape params");
  if (p.noise_amplitude < 0.0f ||
      p.noise_amplitude >= 0.5f / static_cast<float>(p.n_cl))
    throw std::invalid_argument(
        "generate_procedural_scene: noise must stay below half the palette "
        "separation 1/(2*n_cl)");
  std::mt19937 rng(seed);
  struct Shape {
    bool disk;
    int cls;
    int size;
    int x0, y0;
    int vx, vy;
  };
  std::uniform_int_distribution<int> cls_dist(1, p.n_cl - 1);
  std::uniform_int_distribution<int> size_dist(p.min_size, p.max_size);
  std::uniform_int_distribution<int> x_dist(0, p.width - 1);
  std::uniform_int_distribution<int> y_dist(0, p.height - 1);
  std::uniform_int_distribution<int> speed_dist(p.min_speed, p.max_speed);
  std::uniform_int_distribution<int> sign_dist(0, 1);
  std::vector<Shape> shapes;
  for (int i = 0; i < p.n_shapes; ++i) {
    Shape s;
    s.disk = sign_dist(rng) == 1;
    s.cls = cls_dist(rng);
    s.size = size_dist(rng);
    s.x0 = x_dist(rng);
    s.y0 = y_dist(rng);
    s.vx = speed_dist(rng) * (sign_dist(rng) ? 1 : -1);
    s.vy = speed_dist(rng) * (sign_dist(rng) ? 1 : -1);
    shapes.push_back(s);
  }
  auto palette = class_palette(p.n_cl);
  std::uniform_real_distribution<float> noise(-p.noise_amplitude, p.noise_amplitude);
  LabeledSequence seq;
  seq.n_cl = p.n_cl;
  for (int t = 0; t < p.n_frames; ++t) {
    LabelMap lab(p.height, p.width, 0);
    for (const Shape& s : shapes) {
      int cx = s.x0 + s.vx * t;
      int cy = s.y0 + s.vy * t;
      for (int y = std::max(0, cy - s.size); y <= std::min(p.height - 1, cy + s.size); ++y)
        for (int x = std::max(0, cx - s.size); x <= std::min(p.width - 1, cx + s.size); ++x) {
          if (s.disk) {
            int dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy > s.size * s.size) continue;
          }
          lab.at(y, x) = static_cast<uint8_t>(s.cls);
        }
    }
    Tensor frame(3, p.height, p.width);
    for (int y = 0; y < p.height; ++y)
      for (int x = 0; x < p.width; ++x) {
        const auto& col = palette[lab.at(y, x)];
        for (int c = 0; c < 3; ++c) frame.at(c, y, x) = col[c] + noise(rng);
      }
    seq.frames.push_back(std::move(frame));
    seq.labels.push_back(std::move(lab));
  }
  seq.provenance = {{"kind", "procedural"},
                    {"seed", seed},
                    {"n_shapes", p.n_shapes},
                    {"n_frames", p.n_frames}};
  return seq;
}

// ---------------------------------------------------------------------------
// Sequence container: manifest.json + frame_%04d.cwkt + label_%04d.cwkt

namespace detail {

inline std::string index_name(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d.cwkt", prefix, i);
  return buf;
}

}  // namespace detail

inline void write_sequence(const LabeledSequence& seq, const std::string& dir_path) {
  namespace fs = std::filesystem;
  if (seq.frames.size() != seq.labels.size() || seq.frames.empty())
    throw std::invalid_argument("write_sequence: malformed sequence");
  if (seq.n_cl > 255)
    throw std::invalid_argument("write_sequence: n_cl > 255 cannot be stored as u8");
  fs::path dir(dir_path);
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["n_frames"] = seq.frames.size();
  manifest["channels"] = seq.frames[0].channels;
  manifest["height"] = seq.frames[0].height;
  manifest["width"] = seq.frames[0].width;
  manifest["n_cl"] = seq.n_cl;
  manifest["provenance"] = seq.provenance;
  for (size_t i = 0; i < seq.frames.size(); ++i) {
    save_tensor(seq.frames[i], (dir / detail::index_name("frame", static_cast<int>(i))).string());
    save_labels(seq.labels[i], (dir / detail::index_name("label", static_cast<int>(i))).string());
  }
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << "\n";
}

inline LabeledSequence read_sequence(const std::string& dir_path) {
  namespace fs = std::filesystem;
  fs::path dir(dir_path);
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("read_sequence: missing manifest.json in " + dir_path);
  nlohmann::json manifest = nlohmann::json::parse(mf);
  LabeledSequence seq;
  seq.n_cl = manifest.at("n_cl").get<int>();
  seq.provenance = manifest.value("provenance", nlohmann::json::object());
  size_t n = manifest.at("n_frames").get<size_t>();
  int ch = manifest.at("channels").get<int>();
  int h = manifest.at("height").get<int>();
  int w = manifest.at("width").get<int>();
  for (size_t i = 0; i < n; ++i) {
    fs::path fp = dir / detail::index_name("frame", static_cast<int>(i));
    fs::path lp = dir / detail::index_name("label", static_cast<int>(i));
    if (!fs::exists(fp) || !fs::exists(lp))
      throw std::runtime_error("read_sequence: manifest frame count does not match files present");
    Tensor frame = load_tensor(fp.string());
    LabelMap lab = load_labels(lp.string());
    if (frame.channels != ch || frame.height != h || frame.width != w ||
        lab.height != h || lab.width != w)
      throw std::runtime_error("read_sequence: dims disagree with manifest");
    seq.frames.push_back(std::move(frame));
    seq.labels.push_back(std::move(lab));
  }
  return seq;
}

}  // namespace cwk
