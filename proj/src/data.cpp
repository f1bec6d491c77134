#include "tpgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "tpgan/image_io.hpp"

namespace tpgan {

int Dataset::class_index(int class_id) const {
  const auto it = std::find(class_ids.begin(), class_ids.end(), class_id);
  if (it == class_ids.end()) fail(Errc::InvalidArgument, "class " + std::to_string(class_id) + " not in dataset");
  return static_cast<int>(it - class_ids.begin());
}

std::vector<int> Dataset::class_counts() const {
  std::vector<int> counts(num_classes(), 0);
  for (const auto& s : samples) ++counts[s.label];
  return counts;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

Tensor<float> Dataset::images(std::span<const std::size_t> indices) const {
  const int n = indices.empty() ? static_cast<int>(samples.size()) : static_cast<int>(indices.size());
  Tensor<float> out(n, height, width, channels);
  for (int i = 0; i < n; ++i) {
    const auto& img = samples[indices.empty() ? i : indices[i]].image;
    std::copy(img.begin(), img.end(), out.row(i).begin());
  }
  return out;
}

void Dataset::validate() const {
  const std::size_t expected = static_cast<std::size_t>(height) * width * channels;
  for (const auto& s : samples) {
    if (s.image.size() != expected) fail(Errc::ShapeMismatch, "sample " + std::to_string(s.id) + " has wrong size");
    if (s.label < 0 || s.label >= num_classes()) {
      fail(Errc::InvalidArgument, "sample " + std::to_string(s.id) + " label out of range");
    }
    for (float v : s.image) {
      if (!(v >= -1.0f && v <= 1.0f)) fail(Errc::InvalidArgument, "sample " + std::to_string(s.id) + " pixel outside [-1,1]");
    }
  }
}

Dataset load_dataset(const std::filesystem::path& manifest, int image_size, int channels) {
  std::ifstream in(manifest);
  if (!in) fail(Errc::Io, "cannot read manifest " + manifest.string());
  const auto root = manifest.parent_path();
  struct Record {
    std::string path;
    int label;
  };
  std::vector<Record> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cut = line.find_last_of("\t ,");
    if (cut == std::string::npos) fail(Errc::Io, manifest.string() + ":" + std::to_string(line_no) + ": expected '<path> <label>'");
    Record r;
    r.path = line.substr(0, cut);
    while (!r.path.empty() && (r.path.back() == ' ' || r.path.back() == '\t' || r.path.back() == ',')) r.path.pop_back();
    try {
      std::size_t used = 0;
      r.label = std::stoi(line.substr(cut + 1), &used);
      if (used != line.size() - cut - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(Errc::Io, manifest.string() + ":" + std::to_string(line_no) + ": bad label");
    }
    records.push_back(std::move(r));
  }

  Dataset ds;
  ds.height = ds.width = image_size;
  std::set<int> ids;
  for (const auto& r : records) ids.insert(r.label);
  ds.class_ids.assign(ids.begin(), ids.end());
  bool warned_small = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    Image8 img = read_png(root / records[i].path);
    if (ds.channels == 0) ds.channels = channels > 0 ? channels : img.channels;
    img = convert_channels(img, ds.channels);
    if ((img.width < image_size || img.height < image_size) && !warned_small) {
      spdlog::warn("{} is {}x{}, upsampling to {}x{}", records[i].path, img.width, img.height, image_size, image_size);
      warned_small = true;
    }
    Sample s;
    s.image = resize_bilinear(normalize_pixels(img), img.height, img.width, ds.channels, image_size, image_size);
    for (auto& v : s.image) v = std::clamp(v, -1.0f, 1.0f);
    s.label = ds.class_index(records[i].label);
    s.id = static_cast<std::int64_t>(i);
    s.path = (root / records[i].path).lexically_normal().string();
    ds.samples.push_back(std::move(s));
  }
  if (ds.channels == 0) ds.channels = channels > 0 ? channels : 1;
  return ds;
}

void write_manifest(const std::filesystem::path& manifest, const Dataset& dataset) {
  const auto root = std::filesystem::absolute(manifest).parent_path();
  if (!root.empty()) std::filesystem::create_directories(root);
  std::ofstream out(manifest);
  if (!out) fail(Errc::Io, "cannot write manifest " + manifest.string());
  for (const auto& s : dataset.samples) {
    const auto rel = std::filesystem::absolute(s.path).lexically_relative(root);
    out << rel.generic_string() << '\t' << dataset.class_ids[s.label] << '\n';
  }
  if (!out) fail(Errc::Io, "failed writing manifest " + manifest.string());
}

int ImbalanceSpec::minority_count() const {
  if (minority_count_override) return *minority_count_override;
  return static_cast<int>(std::lround(balanced_ratio * majority_count));
}

void ImbalanceSpec::validate() const {
  if (!(balanced_ratio > 0.0 && balanced_ratio <= 1.0)) fail(Errc::Config, "balanced_ratio must lie in (0, 1]");
  if (majority_count < 1) fail(Errc::Config, "majority_count must be positive");
  if (minority_classes.empty()) fail(Errc::Config, "at least one minority class is required");
  std::set<int> seen;
  for (int c : minority_classes) {
    if (c == majority_class) fail(Errc::Config, "minority classes must not include the majority class");
    if (!seen.insert(c).second) fail(Errc::Config, "minority class " + std::to_string(c) + " listed twice");
  }
  if (minority_count() < 1) fail(Errc::Config, "minority count must be at least 1");
}

Split build_imbalanced_split(const Dataset& dataset, const ImbalanceSpec& spec) {
  spec.validate();
  std::vector<int> involved{spec.majority_class};
  involved.insert(involved.end(), spec.minority_classes.begin(), spec.minority_classes.end());

  std::vector<int> sorted_ids = involved;
  std::sort(sorted_ids.begin(), sorted_ids.end());
  Split split;
  for (Dataset* d : {&split.train, &split.test}) {
    d->height = dataset.height;
    d->width = dataset.width;
    d->channels = dataset.channels;
    d->class_ids = sorted_ids;
  }

  Rng rng(spec.seed);
  for (int class_id : involved) {
    const int source_label = dataset.class_index(class_id);
    const int target_label = static_cast<int>(std::find(sorted_ids.begin(), sorted_ids.end(), class_id) - sorted_ids.begin());
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      if (dataset.samples[i].label == source_label) members.push_back(i);
    }
    const int want = class_id == spec.majority_class ? spec.majority_count : spec.minority_count();
    if (static_cast<int>(members.size()) < want) {
      fail(Errc::InsufficientData, "class " + std::to_string(class_id) + " has " + std::to_string(members.size()) +
                                       " samples, " + std::to_string(want) + " required");
    }
    std::vector<bool> taken(members.size(), false);
    for (std::size_t pick : rng.sample_without_replacement(members.size(), static_cast<std::size_t>(want))) {
      taken[pick] = true;
      Sample s = dataset.samples[members[pick]];
      s.label = target_label;
      split.train.samples.push_back(std::move(s));
    }
    for (std::size_t j = 0; j < members.size(); ++j) {
      if (taken[j]) continue;
      Sample s = dataset.samples[members[j]];
      s.label = target_label;
      split.test.samples.push_back(std::move(s));
    }
  }
  return split;
}

std::vector<int> Batch::class_counts(int num_classes) const {
  std::vector<int> counts(num_classes, 0);
  for (int y : labels) ++counts.at(y);
  return counts;
}

Batch sample_actual_batch(const Dataset& train, int m, Rng& rng) {
  if (m < 1) fail(Errc::InvalidArgument, "batch size must be positive");
  if (static_cast<std::size_t>(m) > train.size()) {
    fail(Errc::BatchTooLarge, "batch of " + std::to_string(m) + " from " + std::to_string(train.size()) + " samples");
  }
  const auto picks = rng.sample_without_replacement(train.size(), static_cast<std::size_t>(m));
  Batch b;
  b.images = train.images(picks);
  for (std::size_t i : picks) b.labels.push_back(train.samples[i].label);
  b.origin.assign(picks.size(), Origin::Actual);
  return b;
}

std::vector<int> compute_generation_counts(std::span<const int> actual_labels, int num_classes,
                                           std::span<const int> minority_classes) {
  if (actual_labels.empty()) fail(Errc::InvalidArgument, "generation counts need a non-empty actual batch");
  std::vector<int> counts(num_classes, 0);
  for (int y : actual_labels) ++counts.at(y);
  const int target = *std::max_element(counts.begin(), counts.end());
  std::vector<int> out(num_classes, 0);
  for (int c : minority_classes) out.at(c) = target - counts[c];
  return out;
}

std::vector<int> expand_counts(std::span<const int> counts) {
  std::vector<int> labels;
  for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
  return labels;
}

Batch assemble_balanced_batch(const Batch& actual, const Batch& generated, int num_classes) {
  Batch out;
  out.images = concat_batch(actual.images, generated.images);
  out.labels = actual.labels;
  out.labels.insert(out.labels.end(), generated.labels.begin(), generated.labels.end());
  out.origin = actual.origin;
  out.origin.insert(out.origin.end(), generated.origin.begin(), generated.origin.end());
  const auto counts = out.class_counts(num_classes);
  if (std::adjacent_find(counts.begin(), counts.end(), std::not_equal_to<>()) != counts.end()) {
    std::ostringstream msg;
    msg << "assembled per-class counts differ:";
    for (int c : counts) msg << ' ' << c;
    fail(Errc::ImbalancedAssembly, msg.str());
  }
  return out;
}

}  // namespace tpgan
