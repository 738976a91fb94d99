#include "dblex/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dblex/error.hpp"

namespace dblex::embeddings {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "DBLIEMB1";
constexpr std::size_t kHeaderSize = 8 + 4 + 4 + 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string_view to_string(Level level) {
  return level == Level::sentence ? "sentence" : "token";
}

std::string_view to_string(Pooling pooling) {
  switch (pooling) {
    case Pooling::cls: return "cls";
    case Pooling::mean: return "mean";
    case Pooling::native: return "native";
  }
  return "unknown";
}

Level parse_level(std::string_view s) {
  if (s == "sentence") return Level::sentence;
  if (s == "token") return Level::token;
  throw Error(Errc::invalid_argument, "unknown level '" + std::string(s) + "'");
}

Pooling parse_pooling(std::string_view s) {
  if (s == "cls") return Pooling::cls;
  if (s == "mean") return Pooling::mean;
  if (s == "native") return Pooling::native;
  throw Error(Errc::invalid_argument, "unknown pooling '" + std::string(s) + "'");
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> unit_ids, std::size_t dim,
                                 std::vector<float> values, Level level,
                                 std::vector<std::int32_t> word_map)
    : unit_ids_(std::move(unit_ids)),
      dim_(dim),
      values_(std::move(values)),
      level_(level),
      word_map_(std::move(word_map)) {
  if (dim_ == 0) throw Error(Errc::dim_mismatch, "dim must be positive");
  if (values_.size() != unit_ids_.size() * dim_) {
    throw Error(Errc::dim_mismatch, "value count " + std::to_string(values_.size()) +
                                        " != rows * dim");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(Errc::non_finite, "row " + std::to_string(i / dim_) + " has NaN/Inf");
    }
  }

  if (level_ == Level::sentence) {
    if (!word_map_.empty()) throw Error(Errc::malformed_trailer, "sentence level has word_map");
    for (std::size_t i = 0; i < unit_ids_.size(); ++i) {
      if (!index_.emplace(unit_ids_[i], RowRange{i, i + 1}).second) {
        throw Error(Errc::malformed_trailer, "duplicate unit id " + unit_ids_[i]);
      }
    }
    return;
  }

  if (word_map_.size() != unit_ids_.size()) {
    throw Error(Errc::malformed_trailer, "word_map length != row count");
  }
  std::size_t i = 0;
  while (i < unit_ids_.size()) {
    std::size_t j = i;
    std::int32_t last_word = kMarkerRow;
    while (j < unit_ids_.size() && unit_ids_[j] == unit_ids_[i]) {
      const auto w = word_map_[j];
      if (w < kMarkerRow) throw Error(Errc::malformed_trailer, "negative word index");
      if (w != kMarkerRow) {
        if (w < last_word) {
          throw Error(Errc::malformed_trailer, "word_map decreases within " + unit_ids_[i]);
        }
        last_word = w;
      }
      ++j;
    }
    if (!index_.emplace(unit_ids_[i], RowRange{i, j}).second) {
      throw Error(Errc::malformed_trailer, "rows of " + unit_ids_[i] + " are not contiguous");
    }
    i = j;
  }
}

std::optional<RowRange> EmbeddingMatrix::find(std::string_view unit_id) const {
  const auto it = index_.find(unit_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingMatrix EmbeddingMatrix::relabeled(std::span<const std::string> new_ids) const {
  std::vector<std::string> ids;
  ids.reserve(rows());
  std::size_t unit = 0;
  for (std::size_t i = 0; i < rows(); ++i) {
    if (i > 0 && unit_ids_[i] != unit_ids_[i - 1]) ++unit;
    if (unit >= new_ids.size()) throw Error(Errc::invalid_argument, "too few ids to relabel");
    ids.push_back(new_ids[unit]);
  }
  if (rows() > 0 && unit + 1 != new_ids.size()) {
    throw Error(Errc::invalid_argument, "relabel id count does not match unit count");
  }
  return EmbeddingMatrix(std::move(ids), dim_, values_, level_, word_map_);
}

bool EmbeddingMatrix::operator==(const EmbeddingMatrix& other) const {
  if (unit_ids_ != other.unit_ids_ || dim_ != other.dim_ || level_ != other.level_ ||
      word_map_ != other.word_map_ || values_.size() != other.values_.size()) {
    return false;
  }
  // Bitwise, so -0.0f and 0.0f differ.
  return std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(float)) == 0;
}

std::string encode(const EmbeddingMatrix& m) {
  std::string out;
  out.reserve(kHeaderSize + m.values().size() * 4 + 64);
  out.append(kMagic);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.dim()));
  out.push_back(static_cast<char>(m.level()));
  for (float f : m.values()) put_u32(out, std::bit_cast<std::uint32_t>(f));

  json trailer = {{"unit_ids", m.unit_ids()}};
  if (m.level() == Level::token) trailer["word_map"] = m.word_map();
  const std::string text = trailer.dump();
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.append(text);
  return out;
}

EmbeddingMatrix decode(std::string_view bytes, std::optional<std::size_t> expected_dim) {
  if (bytes.size() >= kMagic.size() && bytes.substr(0, kMagic.size()) != kMagic) {
    throw Error(Errc::magic_mismatch, "bad magic");
  }
  if (bytes.size() < kHeaderSize) throw Error(Errc::truncated, "header is incomplete");

  const std::uint64_t rows = get_u32(bytes, 8);
  const std::uint64_t dim = get_u32(bytes, 12);
  const auto level_byte = static_cast<unsigned char>(bytes[16]);
  if (level_byte > 1) {
    throw Error(Errc::invalid_argument, "level byte " + std::to_string(level_byte));
  }
  if (dim == 0) throw Error(Errc::dim_mismatch, "dim is zero");
  if (expected_dim && dim != *expected_dim) {
    throw Error(Errc::dim_mismatch, "dim " + std::to_string(dim) + ", expected " +
                                        std::to_string(*expected_dim));
  }

  const std::uint64_t payload = rows * dim * 4;
  if (bytes.size() < kHeaderSize + payload + 4) {
    throw Error(Errc::truncated, "payload shorter than rows * dim floats");
  }
  std::vector<float> values(rows * dim);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes, kHeaderSize + 4 * i));
  }

  const std::size_t trailer_at = kHeaderSize + payload;
  const std::uint32_t trailer_len = get_u32(bytes, trailer_at);
  if (bytes.size() < trailer_at + 4 + trailer_len) throw Error(Errc::truncated, "trailer cut short");
  if (bytes.size() > trailer_at + 4 + trailer_len) {
    throw Error(Errc::malformed_trailer, "trailing bytes after trailer");
  }

  std::vector<std::string> unit_ids;
  std::vector<std::int32_t> word_map;
  try {
    const json trailer = json::parse(bytes.substr(trailer_at + 4, trailer_len));
    unit_ids = trailer.at("unit_ids").get<std::vector<std::string>>();
    if (level_byte == 1) word_map = trailer.at("word_map").get<std::vector<std::int32_t>>();
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_trailer, e.what());
  }
  if (unit_ids.size() != rows) throw Error(Errc::malformed_trailer, "unit_ids count != rows");
  return EmbeddingMatrix(std::move(unit_ids), dim, std::move(values),
                         static_cast<Level>(level_byte), std::move(word_map));
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  const std::string bytes = encode(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io_error, "short write to " + path.string());
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_input, "embedding file not found: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode(buf.str(), expected_dim);
}

std::vector<float> pool(std::span<const float> rows, std::size_t dim, Pooling strategy) {
  if (dim == 0 || rows.size() % dim != 0) throw Error(Errc::dim_mismatch, "rows not a multiple of dim");
  const std::size_t n = rows.size() / dim;
  if (n == 0) throw Error(Errc::empty_sentence, "no rows to pool");
  switch (strategy) {
    case Pooling::cls:
      return {rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(dim)};
    case Pooling::mean: {
      std::vector<double> acc(dim, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t d = 0; d < dim; ++d) acc[d] += rows[r * dim + d];
      }
      std::vector<float> out(dim);
      for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(acc[d] / static_cast<double>(n));
      return out;
    }
    case Pooling::native:
      break;
  }
  throw Error(Errc::invalid_argument, "native pooling is done by the provider");
}

double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) throw Error(Errc::dim_mismatch, "cosine of vectors with different dims");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * v[i];
    uu += static_cast<double>(u[i]) * u[i];
    vv += static_cast<double>(v[i]) * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw Error(Errc::zero_norm, "cosine with zero vector");
  // sqrt(uu * vv) rather than sqrt(uu) * sqrt(vv) so cosine(u, u) is exactly 1.
  return std::clamp(dot / std::sqrt(uu * vv), -1.0, 1.0);
}

}  // namespace dblex::embeddings
