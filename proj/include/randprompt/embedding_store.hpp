#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "randprompt/errors.hpp"

namespace randprompt {

enum class EmbeddingKind : std::uint8_t { text = 0, image = 1 };

/// N rows of dim-dimensional float32 vectors, row-major.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(std::size_t dim, std::size_t count, EmbeddingKind kind = EmbeddingKind::text)
      : dim_(dim), count_(count), kind_(kind), data_(dim * count, 0.0f) {
    if (dim == 0) throw ArgumentError("embedding dim must be >= 1");
  }

  EmbeddingMatrix(std::size_t dim, std::vector<float> data, EmbeddingKind kind = EmbeddingKind::text)
      : dim_(dim), kind_(kind), data_(std::move(data)) {
    if (dim == 0) throw ArgumentError("embedding dim must be >= 1");
    if (data_.size() % dim != 0) {
      throw ArgumentError("embedding data length " + std::to_string(data_.size()) +
                          " is not a multiple of dim " + std::to_string(dim));
    }
    count_ = data_.size() / dim;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return count_; }
  EmbeddingKind kind() const noexcept { return kind_; }
  void set_kind(EmbeddingKind kind) noexcept { kind_ = kind; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  /// Rows [0, n).
  EmbeddingMatrix head(std::size_t n) const {
    if (n > count_) throw ArgumentError("head(" + std::to_string(n) + ") exceeds row count");
    return EmbeddingMatrix(dim_, std::vector<float>(data_.begin(), data_.begin() + n * dim_), kind_);
  }

  EmbeddingMatrix select(std::span<const std::size_t> rows) const {
    std::vector<float> out;
    out.reserve(rows.size() * dim_);
    for (auto r : rows) {
      if (r >= count_) throw ArgumentError("row index out of range");
      auto src = row(r);
      out.insert(out.end(), src.begin(), src.end());
    }
    return EmbeddingMatrix(dim_, std::move(out), kind_);
  }

  /// Index of the first non-finite value, or -1.
  long long first_non_finite() const noexcept {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) return static_cast<long long>(i);
    }
    return -1;
  }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t dim_ = 1;
  std::size_t count_ = 0;
  EmbeddingKind kind_ = EmbeddingKind::text;
  std::vector<float> data_;
};

/// Row i of normals and row i of anomalies come from prompt pair i.
struct PairedEmbeddingSet {
  EmbeddingMatrix normals;
  EmbeddingMatrix anomalies;

  PairedEmbeddingSet() = default;
  PairedEmbeddingSet(EmbeddingMatrix n, EmbeddingMatrix a)
      : normals(std::move(n)), anomalies(std::move(a)) {
    if (normals.count() != anomalies.count()) {
      throw DataError("paired set has " + std::to_string(normals.count()) + " normals but " +
                      std::to_string(anomalies.count()) + " anomalies");
    }
    if (normals.dim() != anomalies.dim()) throw DataError("paired set dims differ");
  }

  std::size_t size() const noexcept { return normals.count(); }
  std::size_t dim() const noexcept { return normals.dim(); }

  PairedEmbeddingSet head(std::size_t n) const {
    return PairedEmbeddingSet(normals.head(n), anomalies.head(n));
  }
};

// ---------------------------------------------------------------------------
// EMB1 binary format
//
//   offset  size  field
//   0       4     magic "EMB1" (45 4D 42 31)
//   4       2     version, u16 = 1
//   6       1     kind, u8 (0 = text, 1 = image)
//   7       1     reserved, u8 = 0
//   8       4     dim, u32
//   12      8     count, u64
//   20      4*N*D float32 payload, row-major
//
// All integers and floats little-endian.
// ---------------------------------------------------------------------------

inline constexpr std::array<unsigned char, 4> kEmbMagic = {0x45, 0x4D, 0x42, 0x31};
inline constexpr std::uint16_t kEmbVersion = 1;
inline constexpr std::size_t kEmbHeaderSize = 20;

namespace detail {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                     std::uint8_t>>>;
  auto bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<unsigned char>(bits & 0xFF));
    if constexpr (sizeof(T) > 1) bits >>= 8;
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                     std::uint8_t>>>;
  U bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    if constexpr (sizeof(T) > 1) bits <<= 8;
    bits |= static_cast<U>(p[i]);
  }
  return std::bit_cast<T>(bits);
}

inline std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_all(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace detail

inline std::vector<unsigned char> encode_embeddings(const EmbeddingMatrix& m) {
  std::vector<unsigned char> out(kEmbMagic.begin(), kEmbMagic.end());
  out.reserve(kEmbHeaderSize + 4 * m.data().size());
  detail::put_le<std::uint16_t>(out, kEmbVersion);
  detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(m.kind()));
  detail::put_le<std::uint8_t>(out, 0);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.count()));
  for (float v : m.data()) detail::put_le<float>(out, v);
  return out;
}

/// Parses an EMB1 buffer. `source` only labels error messages.
inline EmbeddingMatrix decode_embeddings(std::span<const unsigned char> bytes,
                                         const std::string& source = "<buffer>") {
  if (bytes.size() < 4 || !std::equal(kEmbMagic.begin(), kEmbMagic.end(), bytes.begin())) {
    throw FormatError(source + ": not an EMB1 file (bad magic)");
  }
  if (bytes.size() < kEmbHeaderSize) throw CorruptionError(source + ": truncated EMB1 header");
  const auto version = detail::get_le<std::uint16_t>(bytes.data() + 4);
  if (version != kEmbVersion) {
    throw FormatError(source + ": unsupported EMB1 version " + std::to_string(version));
  }
  const auto kind = bytes[6];
  if (kind > 1) throw FormatError(source + ": unknown embedding kind " + std::to_string(kind));
  const auto dim = detail::get_le<std::uint32_t>(bytes.data() + 8);
  const auto count = detail::get_le<std::uint64_t>(bytes.data() + 12);
  if (dim == 0) throw FormatError(source + ": dim must be >= 1");
  const std::size_t payload = bytes.size() - kEmbHeaderSize;
  if (count > payload / 4 / dim) {
    throw CorruptionError(source + ": payload has " + std::to_string(payload) +
                          " bytes, header promises " + std::to_string(count) + " rows of dim " +
                          std::to_string(dim));
  }
  if (payload != static_cast<std::size_t>(count) * dim * 4) {
    throw FormatError(source + ": trailing bytes after EMB1 payload");
  }
  std::vector<float> data(static_cast<std::size_t>(count) * dim);
  const unsigned char* p = bytes.data() + kEmbHeaderSize;
  for (std::size_t i = 0; i < data.size(); ++i, p += 4) {
    data[i] = detail::get_le<float>(p);
    if (!std::isfinite(data[i])) {
      throw DataError(source + ": non-finite value at row " + std::to_string(i / dim) +
                      ", column " + std::to_string(i % dim));
    }
  }
  return EmbeddingMatrix(dim, std::move(data), static_cast<EmbeddingKind>(kind));
}

inline void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  if (auto bad = m.first_non_finite(); bad >= 0) {
    throw DataError("refusing to write non-finite value at flat index " + std::to_string(bad));
  }
  detail::write_all(path, encode_embeddings(m));
}

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(detail::read_all(path), path.string());
}

/// Divides each row by its Euclidean norm (accumulated in double).
inline EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
  EmbeddingMatrix out = m;
  for (std::size_t r = 0; r < m.count(); ++r) {
    auto src = m.row(r);
    double sq = 0.0;
    for (float v : src) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw DataError("cannot normalize row " + std::to_string(r) + ": norm is " +
                      std::to_string(norm));
    }
    auto dst = out.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = static_cast<float>(src[c] / norm);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset manifest (JSON)
//
//   {
//     "entries": [{"path": "bottle/test/good/000.png", "label": 0, "category": "bottle"}, ...],
//     "refs": {"bottle": ["bottle/train/good/000.png", ...]}
//   }
//
// Entry order defines row order of the companion image-embedding file. The
// reference-embedding file stores refs with categories in lexicographic order
// and paths in listed order.
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string path;
  int label = 0;
  std::string category;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::map<std::string, std::vector<std::string>> refs;

  /// Distinct categories, sorted.
  std::vector<std::string> categories() const {
    std::set<std::string> seen;
    for (const auto& e : entries) seen.insert(e.category);
    return {seen.begin(), seen.end()};
  }

  /// Row of each reference path in the reference-embedding file.
  std::map<std::string, std::vector<std::size_t>> ref_rows() const {
    std::map<std::string, std::vector<std::size_t>> rows;
    std::size_t next = 0;
    for (const auto& [cat, paths] : refs) {
      auto& r = rows[cat];
      for (std::size_t i = 0; i < paths.size(); ++i) r.push_back(next++);
    }
    return rows;
  }

  std::size_t ref_count() const {
    std::size_t n = 0;
    for (const auto& [cat, paths] : refs) n += paths.size();
    return n;
  }

  void validate() const {
    std::set<std::string> paths;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (e.label != 0 && e.label != 1) {
        throw DataError("manifest entry " + std::to_string(i) + " has label " +
                        std::to_string(e.label) + " (expected 0 or 1)");
      }
      if (e.category.empty()) throw DataError("manifest entry " + std::to_string(i) + " has no category");
      if (e.path.empty()) throw DataError("manifest entry " + std::to_string(i) + " has no path");
      if (!paths.insert(e.path).second) throw DataError("duplicate manifest path: " + e.path);
    }
    std::set<std::string> ref_paths;
    for (const auto& [cat, list] : refs) {
      if (cat.empty()) throw DataError("manifest refs use an empty category");
      for (const auto& p : list) {
        if (!ref_paths.insert(p).second) throw DataError("duplicate reference path: " + p);
      }
    }
  }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    j["entries"].push_back({{"path", e.path}, {"label", e.label}, {"category", e.category}});
  }
  if (!m.refs.empty()) j["refs"] = m.refs;
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("path").get<std::string>(), e.at("label").get<int>(),
                           e.at("category").get<std::string>()});
    }
    if (j.contains("refs")) {
      m.refs = j.at("refs").get<std::map<std::string, std::vector<std::string>>>();
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed manifest: ") + ex.what());
  }
  m.validate();
  return m;
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(path.string() + ": " + ex.what());
  }
  return manifest_from_json(j);
}

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  m.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << manifest_to_json(m).dump(2) << '\n';
}

}  // namespace randprompt
