#include "tpgan/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace tpgan {

namespace {

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_same_v<T, double>) {
      v = std::stod(text, &used);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
      v = std::stoull(text, &used);
    } else {
      v = std::stoi(text, &used);
    }
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(Errc::Config, "'" + key + "': cannot parse '" + text + "'");
  }
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<int> parse_ints(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    if (b == std::string::npos) continue;
    out.push_back(parse_number<int>(key, item.substr(b, e - b + 1)));
  }
  return out;
}

#define INT_FIELD(KEY, MEMBER)                                                                    \
  Field {                                                                                         \
    KEY, [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); },                      \
        [](ExperimentConfig& c, const std::string& v) { c.MEMBER = parse_number<int>(KEY, v); } \
  }
#define U64_FIELD(KEY, MEMBER)                                                                              \
  Field {                                                                                                   \
    KEY, [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); },                                \
        [](ExperimentConfig& c, const std::string& v) { c.MEMBER = parse_number<std::uint64_t>(KEY, v); } \
  }
#define DOUBLE_FIELD(KEY, MEMBER)                                                                    \
  Field {                                                                                            \
    KEY, [](const ExperimentConfig& c) { return fmt_double(c.MEMBER); },                             \
        [](ExperimentConfig& c, const std::string& v) { c.MEMBER = parse_number<double>(KEY, v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"dataset.manifest", [](const ExperimentConfig& c) { return c.dataset_manifest.string(); },
       [](ExperimentConfig& c, const std::string& v) { c.dataset_manifest = v; }},
      INT_FIELD("dataset.channels", dataset_channels),
      INT_FIELD("split.majority_class", split.majority_class),
      {"split.minority_classes", [](const ExperimentConfig& c) { return join_ints(c.split.minority_classes); },
       [](ExperimentConfig& c, const std::string& v) { c.split.minority_classes = parse_ints("split.minority_classes", v); }},
      DOUBLE_FIELD("split.balanced_ratio", split.balanced_ratio),
      INT_FIELD("split.majority_count", split.majority_count),
      {"split.minority_count",
       [](const ExperimentConfig& c) {
         return c.split.minority_count_override ? std::to_string(*c.split.minority_count_override) : std::string("auto");
       },
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "auto" || v.empty()) {
           c.split.minority_count_override.reset();
         } else {
           c.split.minority_count_override = parse_number<int>("split.minority_count", v);
         }
       }},
      U64_FIELD("split.seed", split.seed),
      {"train.profile", [](const ExperimentConfig& c) { return c.train.profile; },
       [](ExperimentConfig& c, const std::string& v) { c.train.profile = v; }},
      INT_FIELD("train.p_epochs", train.p_epochs),
      INT_FIELD("train.a_epochs", train.a_epochs),
      INT_FIELD("train.batch_size", train.batch_size),
      INT_FIELD("train.d_steps_per_g_step", train.d_steps_per_g_step),
      INT_FIELD("train.iterations_per_epoch", train.iterations_per_epoch),
      INT_FIELD("train.eval_every", train.eval_every),
      DOUBLE_FIELD("train.lambda", train.lambda),
      {"train.penalty_target", [](const ExperimentConfig& c) { return to_string(c.train.penalty_link); },
       [](ExperimentConfig& c, const std::string& v) { c.train.penalty_link = parse_output_link(v); }},
      DOUBLE_FIELD("train.learning_rate", train.learning_rate),
      DOUBLE_FIELD("train.momentum_1", train.momentum_1),
      DOUBLE_FIELD("train.momentum_2", train.momentum_2),
      DOUBLE_FIELD("train.epsilon", train.epsilon),
      DOUBLE_FIELD("train.pretrain_holdout", train.pretrain_holdout),
      U64_FIELD("train.seed", train.seed),
      {"experiment.method", [](const ExperimentConfig& c) { return c.method; },
       [](ExperimentConfig& c, const std::string& v) { c.method = v; }},
      INT_FIELD("experiment.repetitions", repetitions),
      {"experiment.output_dir", [](const ExperimentConfig& c) { return c.output_dir.string(); },
       [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; }},
      INT_FIELD("experiment.neighbors", neighbors),
      INT_FIELD("experiment.fid_samples", fid_samples),
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  fail(Errc::Config, "unknown configuration key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

bool is_gan_method(const std::string& method) {
  return method == "gan-v1" || method == "gan-v2" || method == "gan-v3";
}

bool is_oversampling_method(const std::string& method) {
  return method == "smote" || method == "b-smote" || method == "adasyn";
}

Variant variant_for_method(const std::string& method) {
  if (method == "gan-v1") return Variant::V1;
  if (method == "gan-v2") return Variant::V2;
  if (method == "gan-v3") return Variant::V3;
  if (method == "baseline" || is_oversampling_method(method)) return Variant::Baseline;
  fail(Errc::Config, "unknown method '" + method + "'");
}

void ExperimentConfig::validate() const {
  split.validate();
  const Variant v = variant_for_method(method);
  if (v != train.variant) {
    fail(Errc::Config, "method '" + method + "' implies variant " + std::string(to_string(v)));
  }
  train.validate();
  if (repetitions < 1) fail(Errc::Config, "experiment.repetitions must be at least 1");
  if (is_oversampling_method(method) && neighbors < 1) fail(Errc::Config, "experiment.neighbors must be positive");
  if (fid_samples < 2) fail(Errc::Config, "experiment.fid_samples must be at least 2");
  if (dataset_channels < 0) fail(Errc::Config, "dataset.channels must be non-negative");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

std::string get_config_value(const ExperimentConfig& config, const std::string& key) { return field(key).get(config); }

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  field(key).set(config, value);
  if (key == "experiment.method") config.train.variant = variant_for_method(value);
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const std::string key = f.key;
    const std::string sec = key.substr(0, key.find('.'));
    if (sec != section) {
      if (!section.empty()) out += '\n';
      section = sec;
    }
    out += key + " = " + f.get(config) + '\n';
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(Errc::Config, "line " + std::to_string(line_no) + ": expected 'key = value'");
    set_config_value(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) fail(Errc::Config, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  out << serialize_config(config);
  if (!out) fail(Errc::Io, "failed writing " + path.string());
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& dir) {
  const char* root = std::getenv("TPGAN_OUTPUT_ROOT");
  if (root && *root && dir.is_relative()) return std::filesystem::path(root) / dir;
  return dir;
}

}  // namespace tpgan
