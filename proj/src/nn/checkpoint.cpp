#include "tpgan/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace tpgan::nn {

namespace {

constexpr char kMagic[8] = {'T', 'P', 'G', 'A', 'N', 'C', 'K', '1'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  template <typename U>
  void integer(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { integer(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    integer(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  void need(std::size_t n) const {
    if (pos_ + n > size_) fail(Errc::CorruptCheckpoint, "truncated checkpoint");
  }
  template <typename U>
  U integer() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(data_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  float f32() { return std::bit_cast<float>(integer<std::uint32_t>()); }
  std::string str() {
    const auto n = integer<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace

const StoredSection& Checkpoint::section(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return s;
  fail(Errc::CorruptCheckpoint, "checkpoint has no section '" + name + "'");
}

bool Checkpoint::has_section(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return true;
  return false;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.integer(static_cast<std::uint32_t>(checkpoint.meta.size()));
  for (const auto& [k, v] : checkpoint.meta) {
    w.str(k);
    w.str(v);
  }
  w.integer(static_cast<std::uint32_t>(checkpoint.sections.size()));
  for (const auto& s : checkpoint.sections) {
    w.str(s.name);
    w.integer(static_cast<std::uint32_t>(s.tensors.size()));
    for (const auto& t : s.tensors) {
      w.str(t.name);
      w.integer(static_cast<std::uint32_t>(t.shape.size()));
      std::size_t count = 1;
      for (auto d : t.shape) {
        w.integer(d);
        count *= d;
      }
      if (count != t.data.size()) fail(Errc::ShapeMismatch, "stored tensor '" + t.name + "' shape/data mismatch");
      for (float v : t.data) w.f32(v);
    }
  }
  w.integer(fnv1a(w.out.data(), w.out.size()));
  return std::move(w.out);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    fail(Errc::CorruptCheckpoint, "bad checkpoint magic");
  }
  const std::size_t body = bytes.size() - 8;
  Reader tail(bytes.data() + body, 8);
  if (tail.integer<std::uint64_t>() != fnv1a(bytes.data(), body)) fail(Errc::CorruptCheckpoint, "checksum mismatch");

  Reader r(bytes.data(), body);
  r.need(sizeof(kMagic));
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.integer<std::uint8_t>();
  Checkpoint ck;
  const auto meta_count = r.integer<std::uint32_t>();
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string k = r.str();
    ck.meta[k] = r.str();
  }
  const auto section_count = r.integer<std::uint32_t>();
  for (std::uint32_t i = 0; i < section_count; ++i) {
    StoredSection s;
    s.name = r.str();
    const auto tensor_count = r.integer<std::uint32_t>();
    for (std::uint32_t j = 0; j < tensor_count; ++j) {
      StoredTensor t;
      t.name = r.str();
      const auto rank = r.integer<std::uint32_t>();
      std::size_t count = 1;
      for (std::uint32_t d = 0; d < rank; ++d) {
        t.shape.push_back(r.integer<std::uint32_t>());
        count *= t.shape.back();
      }
      r.need(count * 4);
      t.data.resize(count);
      for (auto& v : t.data) v = r.f32();
      s.tensors.push_back(std::move(t));
    }
    ck.sections.push_back(std::move(s));
  }
  if (r.pos() != body) fail(Errc::CorruptCheckpoint, "trailing bytes in checkpoint");
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = encode_checkpoint(checkpoint);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::Io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(Errc::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::CorruptCheckpoint, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

template <typename T>
StoredSection store_params(const std::string& section, const std::vector<Param<T>*>& params) {
  StoredSection s{section, {}};
  for (const auto* p : params) {
    StoredTensor t;
    t.name = p->name;
    for (int d : p->shape) t.shape.push_back(static_cast<std::uint32_t>(d));
    t.data.assign(p->value.begin(), p->value.end());
    s.tensors.push_back(std::move(t));
  }
  return s;
}

template <typename T>
void load_params(const StoredSection& section, const std::vector<Param<T>*>& params) {
  if (section.tensors.size() != params.size()) {
    fail(Errc::CorruptCheckpoint, "section '" + section.name + "' has " + std::to_string(section.tensors.size()) +
                                      " tensors, expected " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = section.tensors[i];
    auto& p = *params[i];
    std::vector<int> shape(t.shape.begin(), t.shape.end());
    if (t.name != p.name || shape != p.shape) {
      fail(Errc::CorruptCheckpoint, "tensor '" + t.name + "' does not match parameter '" + p.name + "'");
    }
    p.value.assign(t.data.begin(), t.data.end());
  }
}

template StoredSection store_params<float>(const std::string&, const std::vector<Param<float>*>&);
template StoredSection store_params<double>(const std::string&, const std::vector<Param<double>*>&);
template void load_params<float>(const StoredSection&, const std::vector<Param<float>*>&);
template void load_params<double>(const StoredSection&, const std::vector<Param<double>*>&);

}  // namespace tpgan::nn
