#include <gtest/gtest.h>

#include <json.hpp>
#include <sstream>

#include "spad/experiment.hpp"
#include "spad/image_io.hpp"
#include "spad/pipeline.hpp"
#include "spad/scene.hpp"

namespace spad {
namespace {

ExperimentConfig parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  apply_config(cfg, in);
  return cfg;
}

TEST(Config, ParsesKeysCommentsAndFractions) {
  const auto cfg = parse(
      "# comment\n"
      "dataset_size = 40\n"
      "epsilon = 8/255   # trailing comment\n"
      "\n"
      "alpha=0.002\n"
      "sigma = 0\n"
      "psz_x0 = 0\n"
      "frames = 5\n");
  EXPECT_EQ(cfg.dataset_size, 40u);
  EXPECT_DOUBLE_EQ(cfg.spad.epsilon, 8.0 / 255.0);
  EXPECT_EQ(cfg.spad.alpha, 0.002);
  EXPECT_EQ(cfg.noise.sigma, 0.0);
  EXPECT_EQ(cfg.psz_rect.x0, 0u);
  EXPECT_EQ(cfg.frames, 5u);
  EXPECT_EQ(cfg.spad.iters, 100u);
}

TEST(Config, ParseFraction) {
  EXPECT_DOUBLE_EQ(parse_fraction("16/255"), 16.0 / 255.0);
  EXPECT_EQ(parse_fraction(" 0.25 "), 0.25);
  EXPECT_THROW(parse_fraction("1/0"), std::invalid_argument);
  EXPECT_THROW(parse_fraction("abc"), std::invalid_argument);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse("bogus = 1\n"), std::invalid_argument);
  EXPECT_THROW(parse("iters = many\n"), std::invalid_argument);
  EXPECT_THROW(parse("just a line\n"), std::invalid_argument);
}

TEST(Config, EchoRoundTrips) {
  const auto cfg = parse("iters = 7\nsigma = 0.125\n");
  const auto echo = config_echo(cfg);
  EXPECT_EQ(echo.at("iters"), "7");
  std::ostringstream text;
  for (const auto& [k, v] : echo) {
    if (k != "psz_rect") text << k << " = " << v << "\n";
  }
  EXPECT_EQ(config_echo(parse(text.str())), echo);
}

TEST(ImageIo, RoundTripIsExact) {
  const Scene s = generate_scene(random_scene_spec(6));
  Tensor img = s.image;
  img[3] = 0.123456789012345678;
  std::stringstream ss;
  write_image(ss, img);
  EXPECT_EQ(read_image(ss), img);
  std::stringstream bad("2 2\n0 1\n0.5\n");
  EXPECT_THROW(read_image(bad), std::runtime_error);
}

TEST(MetricsReport, JsonRoundTripAndFields) {
  MetricsReport m;
  m.behavior_accuracy = {0.5, 0.25};
  m.identity_accuracy = {0.75, 0.125};
  m.count_accuracy = {1.0, 0.0};
  m.psz_mass_before = 0.2;
  m.psz_mass_after = 0.1;
  m.inversion_psnr = {15.5, 12.25};
  m.train_size = 8;
  m.test_size = 2;
  m.config = {{"iters", "100"}};
  const auto text = to_json(m);
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j["identity_accuracy"]["protected"], 0.125);
  EXPECT_EQ(j["psz_attention_mass"]["before"], 0.2);
  EXPECT_EQ(j["inversion_psnr_psz"]["clean"], 15.5);
  const auto back = metrics_from_json(text);
  EXPECT_EQ(back.identity_accuracy.protected_, 0.125);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(to_json(back), text);
  EXPECT_NE(render_table(m).find("identity"), std::string::npos);
}

TEST(Experiment, IdentityConfigurationMakesPipelinesEqual) {
  const auto cfg = parse(
      "dataset_size = 40\n"
      "iters = 0\n"
      "epsilon = 0\n"
      "sigma = 0\n"
      "epochs = 100\n");
  const auto m = run_experiment(cfg);
  EXPECT_EQ(m.train_size, 32u);
  EXPECT_EQ(m.test_size, 8u);
  EXPECT_NEAR(m.behavior_accuracy.clean, m.behavior_accuracy.protected_, 1e-9);
  EXPECT_NEAR(m.identity_accuracy.clean, m.identity_accuracy.protected_, 1e-9);
  EXPECT_NEAR(m.count_accuracy.clean, m.count_accuracy.protected_, 1e-9);
  EXPECT_NEAR(m.inversion_psnr.clean, m.inversion_psnr.protected_, 1e-9);
  EXPECT_NEAR(m.psz_mass_before, m.psz_mass_after, 1e-9);
}

TEST(Experiment, DefaultConfigRegressionAnchors) {
  // Frozen from the first run of the default configuration. These pin current
  // behaviour; they are not targets.
  const auto m = run_experiment(ExperimentConfig{});
  EXPECT_EQ(m.train_size, 160u);
  EXPECT_EQ(m.test_size, 40u);
  EXPECT_DOUBLE_EQ(m.behavior_accuracy.clean, 0.625);
  EXPECT_DOUBLE_EQ(m.behavior_accuracy.protected_, 0.475);
  EXPECT_DOUBLE_EQ(m.identity_accuracy.clean, 0.725);
  EXPECT_DOUBLE_EQ(m.identity_accuracy.protected_, 0.825);
  EXPECT_DOUBLE_EQ(m.count_accuracy.clean, 0.65);
  EXPECT_DOUBLE_EQ(m.count_accuracy.protected_, 0.55);
  EXPECT_NEAR(m.psz_mass_before, 0.14210449141116185, 1e-9);
  EXPECT_NEAR(m.psz_mass_after, 0.0906623524727791, 1e-9);
  EXPECT_NEAR(m.inversion_psnr.clean, 13.76661961630317, 1e-8);
  EXPECT_NEAR(m.inversion_psnr.protected_, 14.74398010764626, 1e-8);
  EXPECT_LT(m.psz_mass_after, m.psz_mass_before);
}

TEST(Experiment, ProtectSceneWithIdentityConfigMatchesClean) {
  const auto cfg = parse("iters = 0\nsigma = 0\n");
  const auto w = backbone_for(cfg);
  const Scene s = generate_scene(random_scene_spec(3));
  EXPECT_EQ(protect_scene(w, s, cfg, 1).received, clean_feature(w, s));
}

class SimulateTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new ExperimentConfig(parse("dataset_size = 24\niters = 10\nepochs = 50\nframes = 5\n"));
    weights_ = new VitWeights(backbone_for(*cfg_));
    models_ = new CloudModels(prepare_cloud_models(*weights_, *cfg_));
  }
  static void TearDownTestSuite() {
    delete cfg_;
    delete weights_;
    delete models_;
  }
  static ExperimentConfig* cfg_;
  static VitWeights* weights_;
  static CloudModels* models_;
};

ExperimentConfig* SimulateTest::cfg_ = nullptr;
VitWeights* SimulateTest::weights_ = nullptr;
CloudModels* SimulateTest::models_ = nullptr;

TEST_F(SimulateTest, FramesArriveInOrder) {
  const auto lines = simulate_pipeline(*cfg_, *weights_, *models_);
  ASSERT_EQ(lines.size(), 5u);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto j = nlohmann::json::parse(lines[k]);
    EXPECT_EQ(j["frame_id"], k);
    EXPECT_EQ(j["timestamp_ms"], k * 100);
  }
}

TEST_F(SimulateTest, CorruptFrameIsIsolated) {
  const auto clean = simulate_pipeline(*cfg_, *weights_, *models_);
  ExperimentConfig cfg = *cfg_;
  cfg.corrupt_frame = 2;
  const auto lines = simulate_pipeline(cfg, *weights_, *models_);
  ASSERT_EQ(lines.size(), 5u);
  const auto err = nlohmann::json::parse(lines[2]);
  EXPECT_EQ(err["error"], "CRC_FAIL");
  for (std::size_t k : {0u, 1u, 3u, 4u}) EXPECT_EQ(lines[k], clean[k]);
}

TEST_F(SimulateTest, OutputIndependentOfChunking) {
  const auto a = simulate_pipeline(*cfg_, *weights_, *models_, 1);
  const auto b = simulate_pipeline(*cfg_, *weights_, *models_, 29);
  const auto c = simulate_pipeline(*cfg_, *weights_, *models_, 1 << 16);
  EXPECT_EQ(a, b);
  EXPECT_EQ(b, c);
}

TEST_F(SimulateTest, EdgeFrameMatchesDecodedStream) {
  const WireFrame f = edge_frame(*weights_, *cfg_, 3);
  EXPECT_EQ(f.frame_id, 3u);
  EXPECT_EQ(f.payload.size(), weights_->config.d_model);
  EXPECT_EQ(f.flags, kFlagNoise);
  EXPECT_EQ(*decode_frame(encode_frame(f)).frame, f);
}

TEST(ErrorRecord, Format) {
  EXPECT_EQ(error_record_json(FrameError::LengthInvalid, 120),
            R"({"error":"LENGTH_INVALID","stream_offset":120})");
}

}  // namespace
}  // namespace spad
