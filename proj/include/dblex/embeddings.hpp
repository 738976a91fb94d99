#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dblex::embeddings {

enum class Level : std::uint8_t { sentence = 0, token = 1 };
enum class Pooling { cls, mean, native };

std::string_view to_string(Level level);
std::string_view to_string(Pooling pooling);
Level parse_level(std::string_view s);
Pooling parse_pooling(std::string_view s);

/// Word index assigned to sentence start/end marker rows in token matrices.
inline constexpr std::int32_t kMarkerRow = -1;

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Row-major float32 matrix, one row per unit. Sentence-level matrices have
/// one row per unit id. Token-level matrices repeat the sentence's unit id on
/// each of its rows (which must be contiguous) and carry a word map giving
/// each row's word index, or kMarkerRow.
///
/// Immutable once built; the constructor enforces every invariant.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::vector<std::string> unit_ids, std::size_t dim, std::vector<float> values,
                  Level level, std::vector<std::int32_t> word_map = {});

  std::size_t rows() const { return unit_ids_.size(); }
  std::size_t dim() const { return dim_; }
  Level level() const { return level_; }
  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  const std::vector<float>& values() const { return values_; }
  const std::vector<std::int32_t>& word_map() const { return word_map_; }

  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  /// Contiguous rows [begin, end) as one flat span.
  std::span<const float> rows(RowRange r) const {
    return {values_.data() + r.begin * dim_, r.size() * dim_};
  }

  /// Rows belonging to a unit id, or nullopt.
  std::optional<RowRange> find(std::string_view unit_id) const;

  /// Replaces unit ids unit-by-unit: the n-th distinct unit (in row order)
  /// gets new_ids[n].
  EmbeddingMatrix relabeled(std::span<const std::string> new_ids) const;

  bool operator==(const EmbeddingMatrix& other) const;

 private:
  std::vector<std::string> unit_ids_;
  std::size_t dim_ = 0;
  std::vector<float> values_;
  Level level_ = Level::sentence;
  std::vector<std::int32_t> word_map_;
  std::map<std::string, RowRange, std::less<>> index_;
};

/// Wire/file format:
///   "DBLIEMB1" | u32 rows | u32 dim | u8 level | rows*dim f32 |
///   u32 trailer_len | trailer (UTF-8 JSON: unit_ids, word_map)
/// All integers and floats little-endian.
std::string encode(const EmbeddingMatrix& m);
EmbeddingMatrix decode(std::string_view bytes, std::optional<std::size_t> expected_dim = {});

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_dim = {});

/// Pools the rows of one sentence (flat, row-major). cls takes row 0, which
/// must be the sentence-start marker; mean averages every row.
std::vector<float> pool(std::span<const float> rows, std::size_t dim, Pooling strategy);

/// dot(u, v) / (|u| |v|), accumulated in double and clamped to [-1, 1].
double cosine(std::span<const float> u, std::span<const float> v);

}  // namespace dblex::embeddings
