#include "spad/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <istream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "spad/inversion.hpp"
#include "spad/metrics.hpp"
#include "spad/rng.hpp"

namespace spad {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw std::invalid_argument("config: bad value for " + key + ": '" + text + "'");
  }
  return value;
}

// Accepts plain decimals and fractions such as 16/255.
double parse_real(const std::string& key, const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_number<double>(key, text);
  const double num = parse_number<double>(key, trim(text.substr(0, slash)));
  const double den = parse_number<double>(key, trim(text.substr(slash + 1)));
  if (den == 0.0) throw std::invalid_argument("config: zero denominator for " + key);
  return num / den;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Embedded {
  LabeledEmbedding behavior, identity, count;
};

std::vector<LabeledEmbedding> column(const std::vector<FeatureEmbedding>& feats,
                                     const std::vector<const Scene*>& scenes, int which) {
  std::vector<LabeledEmbedding> out;
  out.reserve(feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const auto& l = scenes[i]->labels;
    const std::size_t label = which == 0   ? static_cast<std::size_t>(l.behavior)
                              : which == 1 ? l.identity_id
                                           : l.person_count;
    out.push_back({feats[i], label});
  }
  return out;
}

std::vector<std::string> identity_labels() {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < kIdentityCount; ++i) v.push_back("id" + std::to_string(i));
  return v;
}

double inversion_psnr(const std::vector<FeatureEmbedding>& train_feats,
                      const std::vector<const Scene*>& train,
                      const std::vector<FeatureEmbedding>& test_feats,
                      const std::vector<const Scene*>& test, double ridge) {
  std::vector<InversionPair> pairs;
  for (std::size_t i = 0; i < train.size(); ++i) pairs.push_back({train_feats[i], train[i]->image});
  const InversionDecoder dec = train_inversion_decoder(pairs, ridge);
  double sum = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    sum += psnr_region(dec.reconstruct(test_feats[i]), test[i]->image, test[i]->mask);
  }
  return sum / static_cast<double>(test.size());
}

}  // namespace

double parse_fraction(const std::string& text) { return parse_real("number", trim(text)); }

void apply_config(ExperimentConfig& cfg, std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config: expected key=value: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    auto u64 = [&] { return parse_number<std::uint64_t>(key, val); };
    auto uz = [&] { return static_cast<std::size_t>(parse_number<std::uint64_t>(key, val)); };
    auto real = [&] { return parse_real(key, val); };

    if (key == "dataset_size") cfg.dataset_size = uz();
    else if (key == "data_seed") cfg.data_seed = u64();
    else if (key == "split_seed") cfg.split_seed = u64();
    else if (key == "train_fraction") cfg.train_fraction = real();
    else if (key == "psz_x0") cfg.psz_rect.x0 = uz();
    else if (key == "psz_y0") cfg.psz_rect.y0 = uz();
    else if (key == "psz_x1") cfg.psz_rect.x1 = uz();
    else if (key == "psz_y1") cfg.psz_rect.y1 = uz();
    else if (key == "min_overlap") cfg.min_overlap = real();
    else if (key == "alpha") cfg.spad.alpha = real();
    else if (key == "epsilon") cfg.spad.epsilon = real();
    else if (key == "iters") cfg.spad.iters = static_cast<std::uint32_t>(u64());
    else if (key == "w_sem") cfg.spad.weights.w_sem = real();
    else if (key == "w_att") cfg.spad.weights.w_att = real();
    else if (key == "w_val") cfg.spad.weights.w_val = real();
    else if (key == "seed" || key == "model_seed") cfg.spad.seed = u64();
    else if (key == "sigma") cfg.noise.sigma = real();
    else if (key == "noise_seed") cfg.noise.seed = u64();
    else if (key == "lr") cfg.probe.lr = real();
    else if (key == "epochs") cfg.probe.epochs = static_cast<std::uint32_t>(u64());
    else if (key == "ridge") cfg.ridge = real();
    else if (key == "frames") cfg.frames = uz();
    else if (key == "sim_seed") cfg.sim_seed = u64();
    else if (key == "frame_interval_ms") cfg.frame_interval_ms = u64();
    else if (key == "corrupt_frame") cfg.corrupt_frame = parse_number<long long>(key, val);
    else if (key == "behavior_probe") cfg.behavior_probe = val;
    else if (key == "count_probe") cfg.count_probe = val;
    else if (key == "weights") cfg.weights = val;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  ExperimentConfig cfg;
  apply_config(cfg, in);
  return cfg;
}

std::map<std::string, std::string> config_echo(const ExperimentConfig& cfg) {
  return {
      {"dataset_size", std::to_string(cfg.dataset_size)},
      {"data_seed", std::to_string(cfg.data_seed)},
      {"split_seed", std::to_string(cfg.split_seed)},
      {"train_fraction", fmt(cfg.train_fraction)},
      {"psz_rect", std::to_string(cfg.psz_rect.x0) + "," + std::to_string(cfg.psz_rect.y0) + "," +
                       std::to_string(cfg.psz_rect.x1) + "," + std::to_string(cfg.psz_rect.y1)},
      {"min_overlap", fmt(cfg.min_overlap)},
      {"alpha", fmt(cfg.spad.alpha)},
      {"epsilon", fmt(cfg.spad.epsilon)},
      {"iters", std::to_string(cfg.spad.iters)},
      {"w_sem", fmt(cfg.spad.weights.w_sem)},
      {"w_att", fmt(cfg.spad.weights.w_att)},
      {"w_val", fmt(cfg.spad.weights.w_val)},
      {"model_seed", std::to_string(cfg.spad.seed)},
      {"sigma", fmt(cfg.noise.sigma)},
      {"noise_seed", std::to_string(cfg.noise.seed)},
      {"lr", fmt(cfg.probe.lr)},
      {"epochs", std::to_string(cfg.probe.epochs)},
      {"ridge", fmt(cfg.ridge)},
  };
}

VitWeights backbone_for(const ExperimentConfig& cfg) {
  if (!cfg.weights.empty()) return load_weights(cfg.weights);
  return init_weights(VitConfig{}, cfg.spad.seed);
}

ProtectedFeature protect_scene(const VitWeights& weights, const Scene& scene,
                               const ExperimentConfig& cfg, std::uint64_t noise_seed) {
  const PatchIndexSet psz = mask_to_patches(scene.mask, weights.config.patch, cfg.min_overlap);
  const SpadResult spad = spad_optimize(weights, scene.image, psz, cfg.spad);
  NoiseConfig noise = cfg.noise;
  noise.seed = noise_seed;
  ProtectedFeature out;
  const FeatureEmbedding e = inject_noise(extract_embedding(forward(weights, spad.x_safe)), noise);
  out.quantized = quantize(e);
  out.received = dequantize(out.quantized);
  out.psz_mass_before = spad.trace.records.front().psz_mass_fraction;
  out.psz_mass_after = spad.trace.records.back().psz_mass_fraction;
  return out;
}

FeatureEmbedding clean_feature(const VitWeights& weights, const Scene& scene) {
  return dequantize(quantize(extract_embedding(forward(weights, scene.image))));
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  const VitWeights weights = backbone_for(cfg);
  const std::vector<Scene> scenes = generate_dataset(cfg.dataset_size, cfg.data_seed, cfg.psz_rect);

  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle(cfg.split_seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * scenes.size()));
  if (n_train == 0 || n_train >= scenes.size()) {
    throw std::invalid_argument("experiment: split leaves an empty train or test set");
  }

  // Per-scene work is independent; results land in fixed slots.
  std::vector<FeatureEmbedding> clean(scenes.size()), prot(scenes.size());
  std::vector<double> mass_before(scenes.size()), mass_after(scenes.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      clean[i] = clean_feature(weights, scenes[i]);
      const ProtectedFeature p = protect_scene(weights, scenes[i], cfg, derive_seed(cfg.noise.seed, i));
      prot[i] = p.received;
      mass_before[i] = p.psz_mass_before;
      mass_after[i] = p.psz_mass_after;
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  std::vector<std::future<void>> jobs;
  const std::size_t chunk = (scenes.size() + workers - 1) / workers;
  for (std::size_t b = 0; b < scenes.size(); b += chunk) {
    jobs.push_back(std::async(std::launch::async, work, b, std::min(scenes.size(), b + chunk)));
  }
  for (auto& j : jobs) j.get();

  std::vector<const Scene*> train, test;
  std::vector<FeatureEmbedding> clean_train, clean_test, prot_train, prot_test;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    const bool is_train = k < n_train;
    (is_train ? train : test).push_back(&scenes[i]);
    (is_train ? clean_train : clean_test).push_back(clean[i]);
    (is_train ? prot_train : prot_test).push_back(prot[i]);
  }

  MetricsReport m;
  m.train_size = train.size();
  m.test_size = test.size();
  m.config = config_echo(cfg);

  const std::vector<std::string> vocab[3] = {kBehaviorLabels, identity_labels(), kCountLabels};
  PairedMetric* slots[3] = {&m.behavior_accuracy, &m.identity_accuracy, &m.count_accuracy};
  for (int which = 0; which < 3; ++which) {
    const auto ct = column(clean_train, train, which), cs = column(clean_test, test, which);
    const auto pt = column(prot_train, train, which), ps = column(prot_test, test, which);
    slots[which]->clean = probe_accuracy(train_probe(ct, vocab[which], cfg.probe).probe, cs);
    slots[which]->protected_ = probe_accuracy(train_probe(pt, vocab[which], cfg.probe).probe, ps);
  }

  double before = 0.0, after = 0.0;
  for (std::size_t k = n_train; k < order.size(); ++k) {
    before += mass_before[order[k]];
    after += mass_after[order[k]];
  }
  m.psz_mass_before = before / static_cast<double>(test.size());
  m.psz_mass_after = after / static_cast<double>(test.size());

  m.inversion_psnr.clean = inversion_psnr(clean_train, train, clean_test, test, cfg.ridge);
  m.inversion_psnr.protected_ = inversion_psnr(prot_train, train, prot_test, test, cfg.ridge);
  return m;
}

std::string to_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  auto pair = [](const PairedMetric& p) {
    return nlohmann::ordered_json{{"clean", p.clean}, {"protected", p.protected_}};
  };
  j["behavior_accuracy"] = pair(m.behavior_accuracy);
  j["identity_accuracy"] = pair(m.identity_accuracy);
  j["count_accuracy"] = pair(m.count_accuracy);
  j["psz_attention_mass"] = {{"before", m.psz_mass_before}, {"after", m.psz_mass_after}};
  j["inversion_psnr_psz"] = pair(m.inversion_psnr);
  j["train_size"] = m.train_size;
  j["test_size"] = m.test_size;
  j["config"] = m.config;
  return j.dump(2);
}

MetricsReport metrics_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  auto pair = [](const nlohmann::json& p) {
    return PairedMetric{p.at("clean").get<double>(), p.at("protected").get<double>()};
  };
  MetricsReport m;
  m.behavior_accuracy = pair(j.at("behavior_accuracy"));
  m.identity_accuracy = pair(j.at("identity_accuracy"));
  m.count_accuracy = pair(j.at("count_accuracy"));
  m.psz_mass_before = j.at("psz_attention_mass").at("before").get<double>();
  m.psz_mass_after = j.at("psz_attention_mass").at("after").get<double>();
  m.inversion_psnr = pair(j.at("inversion_psnr_psz"));
  m.train_size = j.at("train_size").get<std::size_t>();
  m.test_size = j.at("test_size").get<std::size_t>();
  if (j.contains("config")) m.config = j.at("config").get<std::map<std::string, std::string>>();
  return m;
}

std::string render_table(const MetricsReport& m) {
  std::ostringstream os;
  os << std::fixed;
  auto row = [&](const char* name, double a, double b, int prec) {
    os << std::left << std::setw(28) << name << std::right << std::setprecision(prec)
       << std::setw(12) << a << std::setw(12) << b << std::setw(12) << (b - a) << '\n';
  };
  os << std::left << std::setw(28) << "metric" << std::right << std::setw(12) << "clean"
     << std::setw(12) << "protected" << std::setw(12) << "delta" << '\n';
  os << std::string(64, '-') << '\n';
  row("behavior accuracy", m.behavior_accuracy.clean, m.behavior_accuracy.protected_, 4);
  row("identity accuracy", m.identity_accuracy.clean, m.identity_accuracy.protected_, 4);
  row("person-count accuracy", m.count_accuracy.clean, m.count_accuracy.protected_, 4);
  row("inversion PSNR in PSZ (dB)", m.inversion_psnr.clean, m.inversion_psnr.protected_, 3);
  row("PSZ attention mass", m.psz_mass_before, m.psz_mass_after, 4);
  os << "train/test: " << m.train_size << '/' << m.test_size << '\n';
  return os.str();
}

}  // namespace spad
