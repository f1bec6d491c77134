#include "tpgan/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "tpgan/baselines.hpp"
#include "tpgan/image_io.hpp"
#include "tpgan/losses.hpp"
#include "tpgan/plot.hpp"
#include "tpgan/synthetic.hpp"

namespace tpgan {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kReferenceStream = 3;
constexpr std::uint64_t kFidStream = 4;
constexpr std::uint64_t kOversampleStream = 5;

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(Errc::Io, "failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int image_size_for(const ExperimentConfig& config) { return nn::Profile::by_name(config.train.profile, 1, 2).image_size; }

fs::path split_dir(const ExperimentConfig& config) { return resolve_output_dir(config.output_dir) / "split"; }

Split load_split(const ExperimentConfig& config) {
  const fs::path dir = split_dir(config);
  if (!fs::exists(dir / "train.manifest") || !fs::exists(dir / "test.manifest")) {
    fail(Errc::Io, "no prepared split under " + dir.string() + " (run 'prepare' first)");
  }
  const int size = image_size_for(config);
  Split split{load_dataset(dir / "train.manifest", size, config.dataset_channels),
              load_dataset(dir / "test.manifest", size, config.dataset_channels)};
  if (split.train.class_ids != split.test.class_ids) fail(Errc::InsufficientData, "train and test cover different classes");
  return split;
}

std::string class_ids_text(const Dataset& d) {
  std::string out;
  for (std::size_t i = 0; i < d.class_ids.size(); ++i) out += (i ? "," : "") + std::to_string(d.class_ids[i]);
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s) { return s.empty() ? std::nan("") : std::stod(s); }

}  // namespace

std::vector<double> class_fid(nn::Classifier<float>& reference, nn::Generator<float>& generator,
                              const Dataset& real_pool, int per_class, Rng& rng) {
  const int k = real_pool.num_classes();
  std::vector<double> out;
  for (int c = 0; c < k; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < real_pool.size(); ++i) {
      if (real_pool.samples[i].label == c) members.push_back(i);
    }
    rng.shuffle(members.begin(), members.end());
    if (static_cast<int>(members.size()) > per_class) members.resize(per_class);
    if (static_cast<int>(members.size()) < per_class) {
      spdlog::warn("class {}: {} real images for FID (wanted {})", real_pool.class_ids[c], members.size(), per_class);
    }
    const int n = static_cast<int>(members.size());
    const Eigen::MatrixXd real = classifier_features(reference, real_pool.images(members));
    Tensor<float> gen(0, 0, 0, 0);
    for (int begin = 0; begin < n; begin += 256) {
      const int count = std::min(256, n - begin);
      const std::vector<int> labels(count, c);
      gen = concat_batch(gen, generator.forward(sample_noise(count, generator.profile().noise_dim, rng), labels,
                                                nn::Phase::Inference));
    }
    out.push_back(fid(real, classifier_features(reference, gen)));
  }
  return out;
}

nn::Classifier<float> train_reference_classifier(const Dataset& train, const TrainConfig& config) {
  const nn::Profile profile = profile_for(config, train);
  Rng rng(derive_seed(config.seed, kReferenceStream));
  nn::Classifier<float> c(profile, rng);
  nn::Adam<float> opt(config.adam());
  const int k = train.num_classes();
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < train.size(); ++i) by_class[train.samples[i].label].push_back(i);
  const int per_class = std::max(1, config.batch_size / k);
  // Full passes regardless of iterations_per_epoch, so the feature extractor
  // does not depend on how the alternating phase reads "epoch".
  const int passes = static_cast<int>((train.size() + config.batch_size - 1) / config.batch_size);
  const int steps = std::max(1, config.a_epochs) * passes;
  for (int s = 0; s < steps; ++s) {
    std::vector<std::size_t> idx;
    std::vector<int> labels;
    for (int cls = 0; cls < k; ++cls) {
      if (by_class[cls].empty()) continue;
      for (int j = 0; j < per_class; ++j) {
        idx.push_back(by_class[cls][rng.index(by_class[cls].size())]);
        labels.push_back(cls);
      }
    }
    nn::zero_grad(c.params());
    classifier_loss<float>(c, train.images(idx), labels, Tensor<float>(0, 0, 0, 0), {}, true);
    opt.step(c.params());
  }
  return c;
}

ExperimentSession::ExperimentSession(Split split, ExperimentConfig config)
    : split_(std::move(split)), config_(std::move(config)) {
  real_pool_ = split_.train;
  real_pool_.samples.insert(real_pool_.samples.end(), split_.test.samples.begin(), split_.test.samples.end());
}

const nn::Autoencoder<float>& ExperimentSession::pretrained(const TrainConfig& config) {
  auto it = pretrained_.find(config.seed);
  if (it == pretrained_.end()) {
    auto result = pretrain_autoencoder(split_.train, profile_for(config, split_.train), config);
    it = pretrained_.emplace(config.seed, std::move(result.autoencoder)).first;
  }
  return it->second;
}

nn::Classifier<float>& ExperimentSession::reference(const TrainConfig& config) {
  auto it = reference_.find(config.seed);
  if (it == reference_.end()) it = reference_.emplace(config.seed, train_reference_classifier(split_.train, config)).first;
  return it->second;
}

RunRecord ExperimentSession::run(const std::string& method, std::uint64_t seed, const std::optional<fs::path>& run_dir) {
  const auto start = std::chrono::steady_clock::now();
  TrainConfig cfg = config_.train;
  cfg.seed = seed;
  cfg.variant = variant_for_method(method);
  cfg.validate();

  TrainOptions options;
  options.output_dir = run_dir;
  options.checkpoint_meta["class_ids"] = class_ids_text(split_.train);
  options.checkpoint_meta["method"] = method;
  if (is_gan_method(method)) options.pretrained = &pretrained(cfg);

  Dataset train_data = split_.train;
  if (is_oversampling_method(method)) {
    train_data = oversample_dataset(split_.train, config_.split, parse_oversample_method(method), config_.neighbors,
                                    derive_seed(seed, kOversampleStream));
  }
  TrainResult result = train(train_data, split_.test, config_.split, cfg, options);
  if (is_gan_method(method)) {
    Rng rng(derive_seed(seed, kFidStream));
    result.metrics.fid_per_class = class_fid(reference(cfg), result.state.generator, real_pool_, config_.fid_samples, rng);
  }

  RunRecord rec;
  rec.method = method;
  rec.seed = seed;
  rec.metrics = std::move(result.metrics);
  rec.log = std::move(result.state.log);
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (run_dir) {
    rec.dir = *run_dir;
    write_text(*run_dir / "metrics.csv", metrics_csv({rec}, split_, config_.split.balanced_ratio));
  }
  return rec;
}

std::string metrics_csv(const std::vector<RunRecord>& runs, const Split& split, double balanced_ratio) {
  std::string out = "variant,seed,balanced_ratio,class,precision,recall,f_score,fid\n";
  for (const auto& r : runs) {
    const auto& pc = r.metrics.scores.per_class;
    for (std::size_t c = 0; c < pc.size(); ++c) {
      const double f = c < r.metrics.fid_per_class.size() ? r.metrics.fid_per_class[c] : std::nan("");
      out += r.method + ',' + std::to_string(r.seed) + ',' + fmt(balanced_ratio) + ',' +
             std::to_string(split.train.class_ids[c]) + ',' + fmt(pc[c].precision) + ',' + fmt(pc[c].recall) + ',' +
             fmt(pc[c].f_score) + ',' + fmt(f) + '\n';
    }
  }
  return out;
}

std::string summary_csv(const std::vector<RunRecord>& runs, double balanced_ratio) {
  std::string out = "variant,seed,balanced_ratio,precision,recall,f_score,mean_fid\n";
  double p = 0, r = 0, f = 0, fid_sum = 0;
  int fid_n = 0;
  for (const auto& run : runs) {
    const auto& m = run.metrics.scores.macro;
    double mean_fid = std::nan("");
    if (!run.metrics.fid_per_class.empty()) {
      mean_fid = 0.0;
      for (double v : run.metrics.fid_per_class) mean_fid += v / run.metrics.fid_per_class.size();
      fid_sum += mean_fid, ++fid_n;
    }
    out += run.method + ',' + std::to_string(run.seed) + ',' + fmt(balanced_ratio) + ',' + fmt(m.precision) + ',' +
           fmt(m.recall) + ',' + fmt(m.f_score) + ',' + fmt(mean_fid) + '\n';
    p += m.precision / runs.size(), r += m.recall / runs.size(), f += m.f_score / runs.size();
  }
  if (!runs.empty()) {
    out += runs.front().method + ",mean," + fmt(balanced_ratio) + ',' + fmt(p) + ',' + fmt(r) + ',' + fmt(f) + ',' +
           fmt(fid_n ? fid_sum / fid_n : std::nan("")) + '\n';
  }
  return out;
}

void write_run_manifest(const fs::path& path, const RunManifest& m) {
  auto check = [](const fs::path& p) {
    if (!p.empty() && !fs::exists(p)) fail(Errc::Io, "manifest references missing file " + p.string());
    return p.string();
  };
  nlohmann::json j;
  j["config"] = m.config_text;
  j["seeds"] = m.seeds;
  j["metrics"] = check(m.metrics);
  j["summary"] = check(m.summary);
  j["runs"] = nlohmann::json::array();
  for (const auto& r : m.runs) {
    j["runs"].push_back({{"method", r.method},
                         {"seed", r.seed},
                         {"metrics", check(r.metrics)},
                         {"training_log", check(r.training_log)},
                         {"checkpoint", check(r.checkpoint)},
                         {"seconds", r.seconds}});
  }
  write_text(path, j.dump(2) + "\n");
}

RunManifest read_run_manifest(const fs::path& path) {
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    m.config_text = j.at("config").get<std::string>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.metrics = j.at("metrics").get<std::string>();
    m.summary = j.at("summary").get<std::string>();
    for (const auto& r : j.at("runs")) {
      m.runs.push_back({r.at("method").get<std::string>(), r.at("seed").get<std::uint64_t>(),
                        r.at("metrics").get<std::string>(), r.at("training_log").get<std::string>(),
                        r.at("checkpoint").get<std::string>(), r.at("seconds").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Io, "malformed run manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void cmd_synth(const fs::path& out_dir, int per_class, int size, std::uint64_t seed) {
  SyntheticOptions opts;
  opts.per_class = per_class;
  opts.size = size;
  opts.seed = seed;
  const auto manifest = write_dataset(out_dir, synthesize_fashion(opts));
  spdlog::info("wrote {} images and {}", 3 * per_class, manifest.string());
}

Split cmd_prepare(const ExperimentConfig& config) {
  config.split.validate();
  if (config.dataset_manifest.empty()) fail(Errc::Config, "dataset.manifest is required");
  const Dataset data = load_dataset(config.dataset_manifest, image_size_for(config), config.dataset_channels);
  Split split = build_imbalanced_split(data, config.split);
  const fs::path dir = split_dir(config);
  fs::create_directories(dir);
  write_manifest(dir / "train.manifest", split.train);
  write_manifest(dir / "test.manifest", split.test);
  save_config(dir / "config.txt", config);

  std::ostringstream s;
  const auto train_counts = split.train.class_counts(), test_counts = split.test.class_counts();
  s << "class\ttrain\ttest\n";
  for (int c = 0; c < split.train.num_classes(); ++c) {
    s << split.train.class_ids[c] << '\t' << train_counts[c] << '\t' << test_counts[c] << '\n';
  }
  const int majority = train_counts[split.train.class_index(config.split.majority_class)];
  s << "majority_count\t" << majority << "\nminority_count\t" << config.split.minority_count() << "\nrealized_ratio\t"
    << fmt(static_cast<double>(config.split.minority_count()) / majority) << "\nrequested_ratio\t"
    << fmt(config.split.balanced_ratio) << '\n';
  write_text(dir / "summary.txt", s.str());
  spdlog::info("split written to {}", dir.string());
  return split;
}

RunManifest cmd_train(const ExperimentConfig& config) {
  config.validate();
  ExperimentSession session(load_split(config), config);
  const fs::path root = resolve_output_dir(config.output_dir) / config.method;
  fs::create_directories(root);
  save_config(root / "config.txt", config);

  RunManifest manifest;
  manifest.config_text = serialize_config(config);
  std::vector<RunRecord> records;
  for (int r = 0; r < config.repetitions; ++r) {
    const std::uint64_t seed = config.train.seed + static_cast<std::uint64_t>(r);
    const fs::path dir = root / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    records.push_back(session.run(config.method, seed, dir));
    manifest.seeds.push_back(seed);
    manifest.runs.push_back({config.method, seed, dir / "metrics.csv", dir / "training_log.csv",
                             dir / "checkpoint.tpck", records.back().seconds});
    spdlog::info("{} seed {}: macro F {:.4f} ({:.1f}s)", config.method, seed,
                 records.back().metrics.scores.macro.f_score, records.back().seconds);
  }
  manifest.metrics = root / "metrics.csv";
  manifest.summary = root / "summary.csv";
  write_text(manifest.metrics, metrics_csv(records, session.split(), config.split.balanced_ratio));
  write_text(manifest.summary, summary_csv(records, config.split.balanced_ratio));
  write_run_manifest(root / "manifest.json", manifest);
  return manifest;
}

void cmd_report(const std::vector<fs::path>& manifests, const fs::path& out_dir) {
  if (manifests.empty()) fail(Errc::InvalidArgument, "report needs at least one manifest");
  fs::create_directories(out_dir);

  std::string consolidated;
  std::vector<Series> grad_series;
  // (method, ratio) -> list of per-run macro F, P, R.
  std::map<std::pair<std::string, std::string>, std::vector<std::array<double, 3>>> macro;
  std::vector<std::string> methods, ratios;
  auto remember = [](std::vector<std::string>& v, const std::string& x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
  };

  for (const auto& mpath : manifests) {
    const RunManifest m = read_run_manifest(mpath);
    for (const auto& run : m.runs) {
      std::istringstream in(read_text(run.metrics));
      std::string line;
      std::getline(in, line);
      if (consolidated.empty()) consolidated = line + '\n';
      std::array<double, 3> sums{0, 0, 0};
      int classes = 0;
      std::string ratio;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        consolidated += line + '\n';
        const auto f = split_csv_line(line);
        if (f.size() < 8) fail(Errc::Io, "malformed metrics row in " + run.metrics.string());
        ratio = f[2];
        sums[0] += to_double(f[6]), sums[1] += to_double(f[4]), sums[2] += to_double(f[5]);
        ++classes;
      }
      if (classes > 0) {
        for (auto& v : sums) v /= classes;
        macro[{run.method, ratio}].push_back(sums);
        remember(methods, run.method);
        remember(ratios, ratio);
      }

      const auto log = parse_training_log(read_text(run.training_log));
      Series s{run.method + " seed " + std::to_string(run.seed), {}, {}};
      for (const auto& row : log) {
        s.x.push_back(row.epoch);
        s.y.push_back(row.grad_norm_g);
      }
      grad_series.push_back(std::move(s));
    }
  }
  write_text(out_dir / "metrics.csv", consolidated);
  line_plot(out_dir / "grad_norm.png", "Generator gradient norm", "epoch", "grad norm", grad_series, true);

  std::ostringstream summary;
  summary << "method\tbalanced_ratio\truns\tmacro_f\tmacro_precision\tmacro_recall\n";
  for (int metric = 0; metric < 3; ++metric) {
    static const char* names[] = {"F-score", "Precision", "Recall"};
    static const char* files[] = {"f_score.png", "precision.png", "recall.png"};
    std::vector<BarGroup> groups;
    for (const auto& ratio : ratios) {
      BarGroup g{"ratio " + ratio, {}};
      for (const auto& method : methods) {
        const auto it = macro.find({method, ratio});
        double mean = std::nan("");
        if (it != macro.end()) {
          mean = 0.0;
          for (const auto& v : it->second) mean += v[metric] / it->second.size();
        }
        g.values.push_back(mean);
      }
      groups.push_back(std::move(g));
    }
    bar_plot(out_dir / files[metric], std::string("Macro ") + names[metric], names[metric], methods, groups);
  }
  for (const auto& [key, runs] : macro) {
    std::array<double, 3> mean{0, 0, 0};
    for (const auto& v : runs)
      for (int i = 0; i < 3; ++i) mean[i] += v[i] / runs.size();
    summary << key.first << '\t' << key.second << '\t' << runs.size() << '\t' << fmt(mean[0]) << '\t' << fmt(mean[1])
            << '\t' << fmt(mean[2]) << '\n';
  }
  write_text(out_dir / "summary.txt", summary.str());
}

std::vector<fs::path> cmd_generate(const fs::path& checkpoint, int class_id, int count, std::uint64_t seed,
                                   const fs::path& out_dir) {
  if (count < 0) fail(Errc::InvalidArgument, "count must be non-negative");
  const nn::Checkpoint ck = nn::read_checkpoint(checkpoint);
  nn::Generator<float> g = generator_from_checkpoint(ck);
  int label = class_id;
  if (const auto it = ck.meta.find("class_ids"); it != ck.meta.end()) {
    std::vector<int> ids;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) ids.push_back(std::stoi(item));
    const auto pos = std::find(ids.begin(), ids.end(), class_id);
    if (pos == ids.end()) fail(Errc::InvalidArgument, "class " + std::to_string(class_id) + " unknown to the checkpoint");
    label = static_cast<int>(pos - ids.begin());
  } else if (class_id < 0 || class_id >= g.profile().num_classes) {
    fail(Errc::InvalidArgument, "class " + std::to_string(class_id) + " out of range");
  }
  std::vector<fs::path> files;
  if (count == 0) return files;
  fs::create_directories(out_dir);
  Rng rng(seed);
  const nn::Profile& p = g.profile();
  std::ostringstream manifest;
  for (int begin = 0; begin < count; begin += 256) {
    const int n = std::min(256, count - begin);
    const std::vector<int> labels(n, label);
    const Tensor<float> images = g.forward(sample_noise(n, p.noise_dim, rng), labels, nn::Phase::Inference);
    for (int i = 0; i < n; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "gen_%06d.png", begin + i);
      write_png(out_dir / name, denormalize_pixels(images.row(i).data(), p.image_size, p.image_size, p.channels));
      files.push_back(out_dir / name);
      manifest << name << '\t' << class_id << '\n';
    }
  }
  write_text(out_dir / "generated.manifest", manifest.str());
  return files;
}

fs::path cmd_baseline(const ExperimentConfig& config) {
  if (!is_oversampling_method(config.method)) {
    fail(Errc::Config, "baseline needs experiment.method smote, b-smote or adasyn");
  }
  config.validate();
  Split split = load_split(config);
  const Dataset augmented = oversample_dataset(split.train, config.split, parse_oversample_method(config.method),
                                               config.neighbors, derive_seed(config.train.seed, kOversampleStream));
  const fs::path dir = resolve_output_dir(config.output_dir) / config.method / "augmented";
  fs::create_directories(dir / "synthetic");
  Dataset written = augmented;
  for (std::size_t i = split.train.size(); i < written.samples.size(); ++i) {
    auto& s = written.samples[i];
    const fs::path file = dir / s.path;
    write_png(file, denormalize_pixels(s.image.data(), written.height, written.width, written.channels));
    s.path = file.string();
  }
  const fs::path manifest = dir / "augmented.manifest";
  write_manifest(manifest, written);
  spdlog::info("{} synthetic samples written to {}", written.size() - split.train.size(), dir.string());
  return manifest;
}

}  // namespace tpgan
