// spad: command-line front end for the desensitization pipeline.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "spad/experiment.hpp"
#include "spad/gradient.hpp"
#include "spad/image_io.hpp"
#include "spad/optimizer.hpp"
#include "spad/pipeline.hpp"
#include "spad/rng.hpp"
#include "spad/scene.hpp"

namespace {

int run_gradcheck(std::uint64_t seed, std::uint64_t model_seed, int images) {
  using namespace spad;
  const VitWeights w = init_weights(VitConfig{}, model_seed);
  const PatchIndexSet psz = mask_to_patches(rect_to_mask(kDefaultPszRect, 16, 16), 4);
  double worst = 0.0;
  for (int k = 0; k < images; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    Tensor image(w.config.image_shape());
    for (auto& v : image.data()) v = rng.uniform();
    std::vector<double> ref = forward(w, image).cls_embedding;
    for (auto& v : ref) v += 0.25 * rng.normal();
    const std::pair<const char*, LossSelector> sels[] = {
        {"ATT", LossSelector::attention(psz)},
        {"VAL", LossSelector::value(psz)},
        {"SEM", LossSelector::semantic(ref)},
        {"WEIGHTED", LossSelector::weighted({{LossSelector::semantic(ref), 1.0},
                                             {LossSelector::attention(psz), 1.0},
                                             {LossSelector::value(psz), 0.5}})},
    };
    for (const auto& [name, sel] : sels) {
      const double err =
          max_relative_error(input_gradient(w, image, sel), finite_diff_gradient(w, image, sel));
      worst = std::max(worst, err);
      std::printf("image %d  %-8s  max rel err %.3e\n", k, name, err);
    }
  }
  std::printf("worst %.3e  (%s at 1e-4)\n", worst, worst < 1e-4 ? "PASS" : "FAIL");
  return worst < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPA-D source desensitization: edge perturbation, feature channel, evaluation"};
  app.require_subcommand(1);

  std::uint64_t gc_seed = 3, gc_model = 7;
  int gc_images = 5;
  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and finite-difference input gradients");
  gradcheck->add_option("--seed", gc_seed, "seed for the random test images");
  gradcheck->add_option("--model-seed", gc_model, "backbone weight seed");
  gradcheck->add_option("--images", gc_images, "number of random images");

  std::string image_path, mask_path, out_path, trace_path, weights_path;
  spad::SpadConfig spad_cfg;
  auto* desens = app.add_subcommand("desensitize", "run SPA-D on one image");
  desens->add_option("--image", image_path, "grayscale text image")->required();
  desens->add_option("--mask", mask_path, "PSZ mask text file")->required();
  desens->add_option("--out", out_path, "output image")->required();
  std::string alpha_text = "1/255", epsilon_text = "16/255";
  desens->add_option("--alpha", alpha_text, "step size, e.g. 1/255");
  desens->add_option("--epsilon", epsilon_text, "L-inf budget, e.g. 16/255");
  desens->add_option("--iters", spad_cfg.iters, "iterations");
  desens->add_option("--w-sem", spad_cfg.weights.w_sem, "semantic weight");
  desens->add_option("--w-att", spad_cfg.weights.w_att, "attention weight (lambda)");
  desens->add_option("--w-val", spad_cfg.weights.w_val, "value weight (lambda_v)");
  desens->add_option("--seed", spad_cfg.seed, "backbone weight seed");
  desens->add_option("--weights", weights_path, "backbone weight file (overrides --seed)");
  desens->add_option("--trace", trace_path, "write the per-iteration CSV trace here");

  std::size_t sim_frames = 20;
  std::string config_path, report_path, metrics_path;
  auto* simulate = app.add_subcommand("simulate", "edge -> cloud simulation, one JSON report per line");
  simulate->add_option("--frames", sim_frames, "frame count")->required();
  simulate->add_option("--config", config_path, "key=value config file")->required();
  simulate->add_option("--out", out_path, "output JSON-lines file")->required();

  auto* evaluate = app.add_subcommand("evaluate", "run the privacy/utility experiment");
  evaluate->add_option("--config", config_path, "key=value config file")->required();
  evaluate->add_option("--report", report_path, "metrics JSON output")->required();

  auto* report = app.add_subcommand("report", "render a metrics JSON file as a table");
  report->add_option("--metrics", metrics_path, "metrics JSON")->required();

  std::uint64_t scene_seed = 11;
  auto* scene = app.add_subcommand("scene", "render a synthetic scene and its PSZ mask");
  scene->add_option("--seed", scene_seed, "scene seed");
  scene->add_option("--image", image_path, "output image")->required();
  scene->add_option("--mask", mask_path, "output mask")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gradcheck) return run_gradcheck(gc_seed, gc_model, gc_images);

    if (*desens) {
      spad_cfg.alpha = spad::parse_fraction(alpha_text);
      spad_cfg.epsilon = spad::parse_fraction(epsilon_text);
      const spad::VitWeights w = weights_path.empty()
                                     ? spad::init_weights(spad::VitConfig{}, spad_cfg.seed)
                                     : spad::load_weights(weights_path);
      const spad::Tensor image = spad::load_image(image_path);
      const spad::PixelMask mask = spad::load_mask(mask_path);
      const auto psz = spad::mask_to_patches(mask, w.config.patch);
      const auto result = spad::spad_optimize(w, image, psz, spad_cfg);
      spad::save_image(out_path, result.x_safe);
      if (!trace_path.empty()) {
        std::ofstream t(trace_path);
        spad::write_trace_csv(t, result.trace);
      }
      const auto& first = result.trace.records.front();
      const auto& last = result.trace.records.back();
      std::printf("loss %.6f -> %.6f   psz mass %.4f -> %.4f   max|delta| %.6f\n", first.loss.total,
                  last.loss.total, first.psz_mass_fraction, last.psz_mass_fraction,
                  result.trace.delta.max_abs());
      return 0;
    }

    if (*simulate) {
      spad::ExperimentConfig cfg = spad::load_config(config_path);
      cfg.frames = sim_frames;
      const auto w = spad::backbone_for(cfg);
      const auto models = spad::prepare_cloud_models(w, cfg);
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + out_path);
      for (const auto& line : spad::simulate_pipeline(cfg, w, models)) out << line << '\n';
      return 0;
    }

    if (*evaluate) {
      const auto m = spad::run_experiment(spad::load_config(config_path));
      std::ofstream out(report_path);
      if (!out) throw std::runtime_error("cannot write " + report_path);
      out << spad::to_json(m) << '\n';
      std::cout << spad::render_table(m);
      return 0;
    }

    if (*report) {
      std::ifstream in(metrics_path);
      if (!in) throw std::runtime_error("cannot open " + metrics_path);
      std::stringstream ss;
      ss << in.rdbuf();
      std::cout << spad::render_table(spad::metrics_from_json(ss.str()));
      return 0;
    }

    if (*scene) {
      const auto s = spad::generate_scene(spad::random_scene_spec(scene_seed));
      spad::save_image(image_path, s.image);
      spad::save_mask(mask_path, s.mask);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
