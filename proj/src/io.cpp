#include "uc2/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <unistd.h>

namespace uc2::io {
namespace {

namespace fs = std::filesystem;

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    std::array<std::byte, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(bytes.begin(), bytes.end());
    }
    raw(bytes.data(), sizeof(T));
  }
  void floats(std::span<const float> v) {
    if constexpr (std::endian::native == std::endian::little) {
      raw(v.data(), v.size() * sizeof(float));
    } else {
      for (float f : v) le(f);
    }
  }
  const std::vector<std::byte>& bytes() const { return buf_; }

 private:
  std::vector<std::byte> buf_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::byte> data, const fs::path& path) : data_(data), path_(path) {}

  template <typename T>
  T le() {
    need(sizeof(T));
    std::array<std::byte, sizeof(T)> bytes;
    std::memcpy(bytes.data(), data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(bytes.begin(), bytes.end());
    }
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
  }
  void floats(std::span<float> out) {
    need(out.size() * sizeof(float));
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), data_.data() + pos_, out.size() * sizeof(float));
      pos_ += out.size() * sizeof(float);
    } else {
      for (float& f : out) f = le<float>();
    }
  }
  void magic(std::string_view want) {
    need(4);
    if (std::memcmp(data_.data() + pos_, want.data(), 4) != 0) {
      fail(ErrorCode::kBadMagic, path_.string() + ": expected magic " + std::string(want));
    }
    pos_ += 4;
    const auto version = le<std::uint32_t>();
    if (version != kVersion) {
      fail(ErrorCode::kBadVersion,
           path_.string() + ": unsupported version " + std::to_string(version));
    }
  }
  // Fails with the full expected size when the payload is short.
  void expect_remaining(std::uint64_t bytes) const {
    const std::uint64_t have = data_.size() - pos_;
    if (have < bytes) {
      fail(ErrorCode::kTruncated, path_.string() + ": truncated, expected " +
                                      std::to_string(pos_ + bytes) + " bytes, got " +
                                      std::to_string(data_.size()));
    }
  }
  void finish() const {
    if (pos_ != data_.size()) {
      fail(ErrorCode::kIo, path_.string() + ": " + std::to_string(data_.size() - pos_) +
                               " unexpected trailing bytes");
    }
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      fail(ErrorCode::kTruncated, path_.string() + ": truncated, expected at least " +
                                      std::to_string(pos_ + n) + " bytes, got " +
                                      std::to_string(data_.size()));
    }
  }

  std::span<const std::byte> data_;
  fs::path path_;
  std::size_t pos_ = 0;
};

void write_atomic(const fs::path& path, std::span<const std::byte> bytes) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::kIo, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(ErrorCode::kIo, "rename to " + path.string() + " failed: " + ec.message());
  }
}

void require_finite(std::span<const float> v, const fs::path& path) {
  for (float f : v) {
    if (!std::isfinite(f)) {
      fail(ErrorCode::kNonFinitePayload, path.string() + ": payload holds NaN/Inf");
    }
  }
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFull) fail(ErrorCode::kShape, std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::byte> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> buf(size);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
  if (!in) fail(ErrorCode::kIo, "read failed: " + path.string());
  return buf;
}

void write_matrix(const fs::path& path, const Matrix& m) {
  ByteWriter w;
  w.raw("UC2E", 4);
  w.le<std::uint32_t>(kVersion);
  w.le<std::uint64_t>(m.rows());
  w.le<std::uint32_t>(checked_u32(m.cols(), "dim"));
  w.floats(m.values());
  write_atomic(path, w.bytes());
}

void write_embeddings(const fs::path& path, const EmbeddingMatrix& e) {
  write_matrix(path, e.matrix());
}

EmbeddingReader::EmbeddingReader(const fs::path& path, bool check_finite)
    : in_(path, std::ios::binary), path_(path), check_finite_(check_finite) {
  if (!in_) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::array<std::byte, kEmbeddingHeaderBytes> header{};
  in_.read(reinterpret_cast<char*>(header.data()), header.size());
  const auto got = static_cast<std::size_t>(in_.gcount());
  ByteReader r(std::span<const std::byte>(header.data(), got), path);
  r.magic("UC2E");
  rows_ = r.le<std::uint64_t>();
  dim_ = r.le<std::uint32_t>();
  in_.clear();
  in_.seekg(0, std::ios::end);
  const std::uint64_t size = static_cast<std::uint64_t>(in_.tellg());
  const std::uint64_t expected = kEmbeddingHeaderBytes + rows_ * dim_ * sizeof(float);
  if (size < expected) {
    fail(ErrorCode::kTruncated, path.string() + ": truncated, expected " +
                                    std::to_string(expected) + " bytes, got " +
                                    std::to_string(size));
  }
  if (size > expected) {
    fail(ErrorCode::kIo, path.string() + ": " + std::to_string(size - expected) +
                             " unexpected trailing bytes");
  }
  in_.seekg(kEmbeddingHeaderBytes);
}

std::size_t EmbeddingReader::read_chunk(std::size_t max_rows, std::vector<float>& out) {
  const std::size_t n = static_cast<std::size_t>(
      std::min<std::uint64_t>(max_rows, rows_remaining()));
  if (n == 0) return 0;
  const std::size_t count = n * dim_;
  std::vector<std::byte> buf(count * sizeof(float));
  in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in_.gcount()) != buf.size()) {
    fail(ErrorCode::kTruncated, path_.string() + ": payload ended early");
  }
  const std::size_t at = out.size();
  out.resize(at + count);
  ByteReader(buf, path_).floats(std::span<float>(out.data() + at, count));
  if (check_finite_) require_finite(std::span<const float>(out.data() + at, count), path_);
  consumed_ += n;
  return n;
}

Matrix read_matrix(const fs::path& path, bool check_finite) {
  EmbeddingReader reader(path, check_finite);
  std::vector<float> values;
  values.reserve(static_cast<std::size_t>(reader.rows() * reader.dim()));
  constexpr std::size_t kChunkRows = 65536;
  while (reader.read_chunk(kChunkRows, values) != 0) {
  }
  return Matrix(static_cast<std::size_t>(reader.rows()), reader.dim(), std::move(values));
}

EmbeddingMatrix read_embeddings(const fs::path& path) {
  return EmbeddingMatrix(read_matrix(path, true));
}

void write_codebook(const fs::path& path, const Codebook& codebook,
                    const HierarchicalIndex* index) {
  if (!codebook.all_finite()) {
    fail(ErrorCode::kValidation, "refusing to write a codebook with non-finite rows");
  }
  if (index && (index->k_fine() != codebook.k() || index->dim() != codebook.dim())) {
    fail(ErrorCode::kShape, "index does not match codebook");
  }
  ByteWriter w;
  w.raw("UC2C", 4);
  w.le<std::uint32_t>(kVersion);
  w.le<std::uint64_t>(codebook.k());
  w.le<std::uint32_t>(checked_u32(codebook.dim(), "dim"));
  w.le<std::uint8_t>(index ? 1 : 0);
  w.floats(codebook.centroids().values());
  if (index) {
    w.le<std::uint32_t>(checked_u32(index->k1(), "k1"));
    w.floats(index->coarse_centroids().values());
    for (TokenId p : index->parents()) w.le<std::uint32_t>(p);
  }
  write_atomic(path, w.bytes());
}

StoredCodebook read_codebook(const fs::path& path) {
  const auto bytes = read_bytes(path);
  ByteReader r(bytes, path);
  r.magic("UC2C");
  const auto k = r.le<std::uint64_t>();
  const auto dim = r.le<std::uint32_t>();
  const auto has_index = r.le<std::uint8_t>();
  if (has_index > 1) fail(ErrorCode::kIo, path.string() + ": has_index must be 0 or 1");
  r.expect_remaining(k * dim * sizeof(float));
  Matrix centroids(static_cast<std::size_t>(k), dim);
  r.floats(centroids.values());
  require_finite(centroids.values(), path);
  std::optional<HierarchicalIndex> index;
  if (has_index) {
    const auto k1 = r.le<std::uint32_t>();
    r.expect_remaining(std::uint64_t{k1} * dim * sizeof(float) + k * sizeof(std::uint32_t));
    Matrix coarse(k1, dim);
    r.floats(coarse.values());
    require_finite(coarse.values(), path);
    std::vector<TokenId> parents(static_cast<std::size_t>(k));
    for (auto& p : parents) p = r.le<std::uint32_t>();
    index.emplace(std::move(coarse), std::move(parents));
  }
  r.finish();
  return {Codebook(std::move(centroids)), std::move(index)};
}

void write_tokens(const fs::path& path, std::span<const TokenSequence> sequences, std::size_t k) {
  ByteWriter w;
  w.raw("UC2T", 4);
  w.le<std::uint32_t>(kVersion);
  w.le<std::uint64_t>(k);
  w.le<std::uint64_t>(sequences.size());
  for (const auto& s : sequences) {
    w.le<std::uint32_t>(checked_u32(s.size(), "sequence length"));
    for (TokenId id : s.tokens()) {
      if (id >= k) {
        fail(ErrorCode::kOutOfVocabulary,
             "refusing to write token " + std::to_string(id) + " >= K = " + std::to_string(k));
      }
      w.le<std::uint32_t>(id);
    }
  }
  write_atomic(path, w.bytes());
}

TokenStream read_tokens(const fs::path& path) {
  const auto bytes = read_bytes(path);
  ByteReader r(bytes, path);
  r.magic("UC2T");
  TokenStream out;
  out.k = static_cast<std::size_t>(r.le<std::uint64_t>());
  const auto n = r.le<std::uint64_t>();
  for (std::uint64_t s = 0; s < n; ++s) {
    const auto t = r.le<std::uint32_t>();
    r.expect_remaining(std::uint64_t{t} * sizeof(std::uint32_t));
    std::vector<TokenId> ids(t);
    for (auto& id : ids) id = r.le<std::uint32_t>();
    try {
      out.sequences.emplace_back(std::move(ids), out.k);
    } catch (const Error& e) {
      fail(ErrorCode::kIo, path.string() + ": " + e.what());
    }
  }
  r.finish();
  return out;
}

void write_labels(const fs::path& path, std::span<const std::uint32_t> labels,
                  std::size_t num_labels) {
  const TokenSequence seq(std::vector<TokenId>(labels.begin(), labels.end()), num_labels);
  write_tokens(path, std::span<const TokenSequence>(&seq, 1), num_labels);
}

std::pair<std::vector<std::uint32_t>, std::size_t> read_labels(const fs::path& path) {
  auto stream = read_tokens(path);
  std::vector<std::uint32_t> labels;
  for (const auto& s : stream.sequences) labels.insert(labels.end(), s.tokens().begin(), s.tokens().end());
  return {std::move(labels), stream.k};
}

void write_paired(const fs::path& patches, const fs::path& prompts, const PairedDataset& data) {
  Matrix all(0, data.patches.empty() ? 0 : data.patches.front().cols());
  for (const auto& p : data.patches) {
    for (std::size_t r = 0; r < p.rows(); ++r) all.append_row(p.row(r));
  }
  write_matrix(patches, all);
  Matrix z(data.prompts.rows(), data.prompts.cols());
  for (std::size_t i = 0; i < z.size(); ++i) z.values()[i] = static_cast<float>(data.prompts.values()[i]);
  write_matrix(prompts, z);
}

PairedDataset read_paired(const fs::path& patches, const fs::path& prompts, std::size_t seq_len) {
  if (seq_len < 1) fail(ErrorCode::kInvalidConfig, "seq_len must be >= 1");
  const Matrix all = read_matrix(patches);
  const Matrix z = read_matrix(prompts);
  if (all.rows() != z.rows() * seq_len) {
    fail(ErrorCode::kShape, "patch rows " + std::to_string(all.rows()) + " != items " +
                                std::to_string(z.rows()) + " x seq_len " +
                                std::to_string(seq_len));
  }
  PairedDataset out;
  out.prompts = MatrixD(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.size(); ++i) out.prompts.values()[i] = z.values()[i];
  for (std::size_t item = 0; item < z.rows(); ++item) {
    Matrix p(seq_len, all.cols());
    for (std::size_t t = 0; t < seq_len; ++t) {
      const auto src = all.row(item * seq_len + t);
      std::copy(src.begin(), src.end(), p.row(t).begin());
    }
    out.patches.push_back(std::move(p));
  }
  return out;
}

fs::path projection_path(const fs::path& path) {
  fs::path p = path;
  p += ".proj.uc2e";
  return p;
}

void write_cascade(const fs::path& path, const CascadedCodebook& cascade,
                   const ProjectionMap& map) {
  Matrix table(cascade.k(), cascade.d2());
  for (std::size_t i = 0; i < table.size(); ++i) {
    table.values()[i] = static_cast<float>(cascade.trainable().values()[i]);
  }
  write_codebook(path, Codebook(std::move(table)));
  Matrix proj(map.d_out(), map.d_in() + 1);
  for (std::size_t r = 0; r < map.d_out(); ++r) {
    for (std::size_t c = 0; c < map.d_in(); ++c) proj(r, c) = static_cast<float>(map.weights(r, c));
    proj(r, map.d_in()) = static_cast<float>(map.bias[r]);
  }
  write_matrix(projection_path(path), proj);
}

}  // namespace uc2::io
