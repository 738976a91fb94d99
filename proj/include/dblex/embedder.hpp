#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dblex/corpus.hpp"
#include "dblex/embeddings.hpp"

namespace dblex::embeddings {

struct EmbedderProfile {
  std::string embedder_id;
  Pooling pooling = Pooling::cls;
  std::size_t dim = 0;
};

/// Text -> vectors provider. embed() returns unit ids "0".."n-1" (one unit per
/// input text). For Level::token each text is a sentence's tokens joined by
/// single spaces, and word indices refer to those space-separated words.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string embedder_id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual EmbeddingMatrix embed(std::span<const std::string> texts, Level level,
                                Pooling pooling) = 0;
};

inline constexpr std::uint64_t kDefaultMockSeed = 0x5eed;

/// Hashed character n-gram embedder. A word's vector is the L2-normalized sum
/// of seeded pseudo-random vectors for the case-folded word, its boundary
/// bigrams and trigrams, and a weighted consonant skeleton (vowels dropped,
/// repeats collapsed), so spelling variants get similar vectors. Sentence
/// vectors (native) are the normalized mean of word vectors. Token-level
/// output is [start marker = sentence vector, subword rows..., end marker],
/// where a word is cut into pieces of up to 4 code points and each piece row
/// is the word vector nudged by a piece-specific vector.
class MockEmbedder final : public Embedder {
 public:
  /// The id is "mock-d<dim>", with "-s<seed>" appended for a non-default seed.
  explicit MockEmbedder(std::size_t dim = 128, std::uint64_t seed = kDefaultMockSeed);

  std::string embedder_id() const override;
  std::size_t dim() const override { return dim_; }
  EmbeddingMatrix embed(std::span<const std::string> texts, Level level,
                        Pooling pooling) override;

  std::vector<double> word_vector(std::string_view word) const;

 private:
  std::vector<double> feature_vector(std::string_view feature) const;
  /// Token rows for one sentence; word_map is appended alongside.
  void token_rows(const std::vector<std::string>& words, std::vector<float>& values,
                  std::vector<std::int32_t>& word_map) const;

  std::size_t dim_;
  std::uint64_t seed_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{200};
};

/// Client for the embedding provider contract: POST /embed and GET /info.
/// Transport failures and 5xx responses are retried; the final error carries
/// the attempt count.
class HttpEmbedderClient final : public Embedder {
 public:
  explicit HttpEmbedderClient(std::string base_url, RetryPolicy retry = {},
                              std::chrono::seconds timeout = std::chrono::seconds(60));

  std::string embedder_id() const override;
  std::size_t dim() const override;
  EmbeddingMatrix embed(std::span<const std::string> texts, Level level,
                        Pooling pooling) override;

 private:
  void fetch_info() const;

  std::string base_url_;
  RetryPolicy retry_;
  std::chrono::seconds timeout_;
  mutable std::string embedder_id_;
  mutable std::size_t dim_ = 0;
};

/// Serves any Embedder over the provider contract. Used by tests and by the
/// `serve-embedder` tool command to stand in for an inference sidecar.
class EmbeddingService {
 public:
  explicit EmbeddingService(std::shared_ptr<Embedder> embedder);
  ~EmbeddingService();
  EmbeddingService(const EmbeddingService&) = delete;
  EmbeddingService& operator=(const EmbeddingService&) = delete;

  /// Binds to host:port (port 0 picks a free port) and serves on a
  /// background thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Texts sent for a sentence list at the given level.
std::vector<std::string> embedding_texts(std::span<const corpus::Sentence> sentences, Level level);

/// Embeds sentences and relabels the result with their sentence ids.
EmbeddingMatrix fetch_embeddings(Embedder& embedder, std::span<const corpus::Sentence> sentences,
                                 Level level, Pooling pooling);

}  // namespace dblex::embeddings
