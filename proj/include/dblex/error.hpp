#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dblex {

enum class Errc {
  invalid_argument,
  io_error,
  // embeddings
  empty_sentence,
  zero_norm,
  magic_mismatch,
  dim_mismatch,
  truncated,
  non_finite,
  malformed_trailer,
  http_failure,
  // miner / aligner / eval
  missing_embedding,
  degenerate_sample,
  unmapped_word,
  empty_word,
  no_overlap,
  // annotation
  not_found,
  conflict,
  schema_violation,
  insufficient_annotators,
  unauthorized,
  // pipeline
  config_error,
  missing_input,
};

std::string_view errc_name(Errc code);

/// Every failure raised by the library carries one of the codes above so
/// callers (CLI exit codes, HTTP status mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::io_error: return "io_error";
    case Errc::empty_sentence: return "empty_sentence";
    case Errc::zero_norm: return "zero_norm";
    case Errc::magic_mismatch: return "magic_mismatch";
    case Errc::dim_mismatch: return "dim_mismatch";
    case Errc::truncated: return "truncated";
    case Errc::non_finite: return "non_finite";
    case Errc::malformed_trailer: return "malformed_trailer";
    case Errc::http_failure: return "http_failure";
    case Errc::missing_embedding: return "missing_embedding";
    case Errc::degenerate_sample: return "degenerate_sample";
    case Errc::unmapped_word: return "unmapped_word";
    case Errc::empty_word: return "empty_word";
    case Errc::no_overlap: return "no_overlap";
    case Errc::not_found: return "not_found";
    case Errc::conflict: return "conflict";
    case Errc::schema_violation: return "schema_violation";
    case Errc::insufficient_annotators: return "insufficient_annotators";
    case Errc::unauthorized: return "unauthorized";
    case Errc::config_error: return "config_error";
    case Errc::missing_input: return "missing_input";
  }
  return "unknown";
}

}  // namespace dblex
