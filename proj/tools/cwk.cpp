#include <iostream>

#include <CLI11.hpp>

#include "cwk/experiment.hpp"

namespace {

nlohmann::json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config " + path);
  return nlohmann::json::parse(is);
}

int cmd_generate(const std::string& kind, const std::string& out, uint32_t seed,
                 int frames, int displacement, int shapes, int n_cl, int height,
                 int width, int crop, float noise, const std::string& source) {
  cwk::LabeledSequence seq;
  if (kind == "procedural") {
    cwk::ProceduralParams p;
    p.n_cl = n_cl;
    p.height = height;
    p.width = width;
    p.n_shapes = shapes;
    p.n_frames = frames;
    p.noise_amplitude = noise;
    seq = cwk::generate_procedural_scene(seed, p);
  } else if (kind == "translated") {
    cwk::Tensor image;
    cwk::LabelMap labels;
    int src_n_cl = n_cl;
    if (!source.empty()) {
      cwk::LabeledSequence src = cwk::read_sequence(source);
      image = src.frames[0];
      labels = src.labels[0];
      src_n_cl = src.n_cl;
    } else {
      // default source: one procedural canvas wider than the crop
      cwk::ProceduralParams p;
      p.n_cl = n_cl;
      p.height = std::max(crop, 64);
      p.width = std::max(3 * crop, 96);
      p.n_shapes = shapes;
      p.n_frames = 1;
      p.noise_amplitude = noise;
      cwk::LabeledSequence src = cwk::generate_procedural_scene(seed, p);
      image = src.frames[0];
      labels = src.labels[0];
    }
    cwk::TranslatedSpec spec;
    spec.displacement = displacement;
    spec.n_frames = frames;
    spec.crop_height = crop;
    spec.crop_width = crop;
    seq = cwk::generate_translated_sequence(image, labels, spec, src_n_cl);
  } else {
    throw std::invalid_argument("generate: kind must be procedural or translated");
  }
  cwk::write_sequence(seq, out);
  std::cout << "wrote " << seq.frames.size() << " frames ("
            << seq.frames[0].height << "x" << seq.frames[0].width << ", "
            << seq.n_cl << " classes) to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clockwork staged-network executor"};
  app.require_subcommand(1);
  app.footer("Environment: CWK_THREADS caps per-sequence parallelism (0 or unset = one worker per hardware thread).");

  // generate
  auto* gen = app.add_subcommand("generate", "generate a labeled sequence");
  std::string g_kind = "procedural", g_out, g_source;
  uint32_t g_seed = 0;
  int g_frames = 6, g_disp = 2, g_shapes = 4, g_ncl = 8, g_h = 32, g_w = 32,
      g_crop = 32;
  float g_noise = 0.02f;
  gen->add_option("--kind", g_kind, "procedural | translated");
  gen->add_option("--out", g_out, "output sequence directory")->required();
  gen->add_option("--seed", g_seed);
  gen->add_option("--frames", g_frames);
  gen->add_option("--displacement", g_disp, "crop shift per frame (translated)");
  gen->add_option("--shapes", g_shapes);
  gen->add_option("--n-cl", g_ncl);
  gen->add_option("--height", g_h);
  gen->add_option("--width", g_w);
  gen->add_option("--crop", g_crop, "crop window side (translated)");
  gen->add_option("--noise", g_noise);
  gen->add_option("--source", g_source, "source sequence dir (translated)");

  // run
  auto* run = app.add_subcommand("run", "run a schedule per an experiment config");
  std::string r_config;
  bool r_paper_costs = false;
  run->add_option("--config", r_config)->required();
  run->add_flag("--paper-costs", r_paper_costs,
                "use the default cost model (0.59/0.18/0.21 + 0.02 fusion)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "sweep adaptive thresholds");
  std::string s_config, s_out = "sweep.csv";
  std::vector<double> s_thetas;
  double s_bisect = -1.0;
  sweep->add_option("--config", s_config)->required();
  sweep->add_option("--out", s_out);
  sweep->add_option("--thetas", s_thetas, "explicit theta values");
  sweep->add_option("--bisect", s_bisect,
                    "bisect theta to this full-frame fraction instead");

  // profile
  auto* prof = app.add_subcommand("profile", "per-stage temporal differences");
  std::string p_config, p_out = "profile.csv";
  prof->add_option("--config", p_config)->required();
  prof->add_option("--out", p_out);

  // weights
  auto* weights = app.add_subcommand("weights", "init / inspect weight bundles");
  weights->require_subcommand(1);
  auto* w_init = weights->add_subcommand("init", "initialize a toy network");
  std::string wi_out;
  uint32_t wi_seed = 0;
  int wi_ncl = 8, wi_in = 3;
  std::vector<int> wi_channels = {8, 16, 32};
  w_init->add_option("--out", wi_out)->required();
  w_init->add_option("--seed", wi_seed);
  w_init->add_option("--n-cl", wi_ncl);
  w_init->add_option("--in-channels", wi_in);
  w_init->add_option("--channels", wi_channels);
  auto* w_inspect = weights->add_subcommand("inspect", "print bundle summary");
  std::string wx_dir;
  w_inspect->add_option("dir", wx_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed())
      return cmd_generate(g_kind, g_out, g_seed, g_frames, g_disp, g_shapes,
                          g_ncl, g_h, g_w, g_crop, g_noise, g_source);
    if (run->parsed()) {
      cwk::ExperimentConfig cfg = cwk::parse_experiment_config(load_config(r_config));
      if (r_paper_costs) cfg.cost_given = false;
      if (cfg.preset != "clockfcn") {
        std::string out = cfg.out_csv.empty() ? "recurrent.csv" : cfg.out_csv;
        cwk::run_recurrent_demo(cfg, 32, out);
        std::cout << "preset " << cfg.preset << ": wrote " << out << "\n";
        return 0;
      }
      cwk::ExperimentResult r = cwk::run_experiment(cfg);
      std::cout << "schedule " << cfg.schedule.name << ": mean IU "
                << cwk::detail::fmt(r.mean_iu) << ", fwIU "
                << cwk::detail::fmt(r.fw_iu) << ", compute "
                << cwk::detail::fmt(r.compute_fraction) << ", latency (paper) "
                << cwk::detail::fmt(r.latency_paper) << ", full frames "
                << cwk::detail::fmt(r.full_frame_fraction) << "\n";
      return 0;
    }
    if (sweep->parsed()) {
      cwk::ExperimentConfig cfg = cwk::parse_experiment_config(load_config(s_config));
      if (s_bisect >= 0.0) {
        cwk::BisectResult b = cwk::bisect_theta(cfg, s_bisect);
        if (!b.feasible) {
          std::cerr << "bisection infeasible for target " << s_bisect << "\n";
          return 1;
        }
        cwk::write_sweep_csv({b.row}, s_out);
        std::cout << "theta " << cwk::detail::fmt(b.row.theta)
                  << " gives full-frame fraction "
                  << cwk::detail::fmt(b.row.full_frame_fraction) << " ("
                  << b.iterations << " iterations)\n";
        return 0;
      }
      if (s_thetas.empty())
        for (int i = 0; i <= 10; ++i) s_thetas.push_back(0.05 * i);
      for (double th : s_thetas)
        if (th < 0.0 || th > 1.0)
          throw std::invalid_argument("sweep: theta must be in [0,1]");
      cwk::write_sweep_csv(cwk::run_sweep(cfg, s_thetas), s_out);
      std::cout << "wrote " << s_thetas.size() << " sweep rows to " << s_out << "\n";
      return 0;
    }
    if (prof->parsed()) {
      cwk::ExperimentConfig cfg = cwk::parse_experiment_config(load_config(p_config));
      auto rows = cwk::run_profile(cfg);
      cwk::write_profile_csv(rows, p_out);
      for (const auto& r : rows)
        std::cout << r.layer << ": " << cwk::detail::fmt(r.mean) << " +- "
                  << cwk::detail::fmt(r.stdev) << "\n";
      return 0;
    }
    if (w_init->parsed()) {
      cwk::ToyArchSpec spec;
      spec.n_cl = wi_ncl;
      spec.in_channels = wi_in;
      spec.stage_channels = wi_channels;
      cwk::StagedNetwork net = cwk::init_weights(spec, wi_seed);
      cwk::save_weights(net, wi_out);
      std::cout << "wrote " << net.stage_count() << "-stage bundle to " << wi_out
                << "\n";
      return 0;
    }
    if (w_inspect->parsed()) {
      cwk::StagedNetwork net = cwk::load_weights(wx_dir);
      std::cout << net.stage_count() << " stages, " << net.n_cl << " classes, "
                << net.in_channels << " input channels\n";
      for (int k = 0; k < net.stage_count(); ++k)
        std::cout << "  stage " << k << ": " << net.stages[k].feature_ops.size()
                  << " ops, downsample x" << net.stages[k].downsample_factor
                  << "\n";
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
