#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dblex/error.hpp"
#include "dblex/eval.hpp"

namespace dblex::annotation {

inline constexpr std::size_t kDefaultControlSize = 200;
inline constexpr const char* kTokenHeader = "X-Annotation-Token";

enum class TaskKind { bitext, wordpair };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view s);

/// Likert judgment of a sentence pair.
struct BitextAnnotation {
  std::string pair_ref;
  std::string annotator_id;
  std::string label;                    // idk | n/a | incomplete | 1..5
  std::optional<std::string> factual;   // required for 2..4, forbidden for escapes and 5
  std::optional<bool> grammar_differs;  // unset is kept unset
  std::optional<std::string> comment;
  std::string timestamp;

  bool operator==(const BitextAnnotation&) const = default;
};

/// Binary judgment of a lexicon entry.
struct WordPairAnnotation {
  std::string entry_ref;
  std::string annotator_id;
  std::string label;  // yes | no | idk
  std::optional<bool> pos_mismatch;
  std::optional<bool> partial_match;
  std::optional<std::string> comment;
  std::string timestamp;

  bool operator==(const WordPairAnnotation&) const = default;
};

using Annotation = std::variant<BitextAnnotation, WordPairAnnotation>;

const std::vector<std::string>& bitext_labels();
const std::vector<std::string>& factual_values();
const std::vector<std::string>& wordpair_labels();

/// Throws schema_violation with a field-level detail.
void validate(const BitextAnnotation& a);
void validate(const WordPairAnnotation& a);
void validate(const Annotation& a);

const std::string& item_ref(const Annotation& a);
const std::string& annotator_of(const Annotation& a);

/// Log/wire form. Unset optionals are omitted, never written as null.
nlohmann::json to_json(const Annotation& a);
/// Parses a record of the given kind; unknown keys and wrong types are
/// schema violations. The timestamp may be absent (filled in by the store).
Annotation annotation_from_json(const nlohmann::json& j, TaskKind kind);

struct TaskItem {
  std::string ref;
  nlohmann::json context = nlohmann::json::object();  // what the annotator is shown
};

struct AnnotationTask {
  std::string task_id;
  TaskKind kind = TaskKind::bitext;
  std::vector<TaskItem> items;
  std::vector<std::string> control_refs;  // in item order
  std::uint64_t seed = 0;
  /// Annotators served every item. Anyone else is served only the control
  /// items. Empty: everyone is served every item.
  std::vector<std::string> primary_annotators;

  bool is_control(std::string_view ref) const;
  bool serves(std::string_view annotator, std::string_view ref) const;
};

nlohmann::json to_json(const AnnotationTask& t);
AnnotationTask task_from_json(const nlohmann::json& j);

/// Control subset drawn uniformly with the seed, kept in item order. Item refs
/// must be unique and non-empty; control_size must not exceed the item count.
AnnotationTask create_task(std::string task_id, TaskKind kind, std::vector<TaskItem> items,
                           std::size_t control_size, std::uint64_t seed,
                           std::vector<std::string> primary_annotators = {});

struct NextOptions {
  bool replace = false;             // also serve items this annotator already labeled
  std::optional<std::string> after; // start after this ref
};

struct NextItem {
  bool done = true;
  std::optional<TaskItem> item;
  bool control = false;
  bool already_labeled = false;
  std::size_t labeled = 0;  // items this annotator has labeled
  std::size_t assigned = 0; // items this annotator is served
};

struct ControlAgreement {
  std::string annotator_a;
  std::string annotator_b;
  eval::AgreementReport report;
};

struct SubmitResult {
  bool replaced = false;
  nlohmann::json record;
};

/// Tasks and labels under one directory: <id>.task.json per task and an
/// append-only <id>.labels.jsonl log. The log is replayed on open with
/// last-write-wins per (annotator, item). Writers are serialized; readers
/// run concurrently.
class AnnotationStore {
 public:
  using Clock = std::function<std::string()>;

  explicit AnnotationStore(std::filesystem::path dir, Clock clock = {});

  std::vector<AnnotationTask> tasks() const;
  AnnotationTask task(std::string_view task_id) const;

  /// Persists a task; an existing id is a conflict.
  void add_task(const AnnotationTask& task);

  NextItem next_item(std::string_view task_id, std::string_view annotator,
                     const NextOptions& options = {}) const;

  /// Validates and appends. A repeated (annotator, item) replaces the earlier
  /// label and is logged with "replaced": true.
  SubmitResult submit(std::string_view task_id, Annotation annotation);

  /// Current labels: items in task order, annotators by id within an item.
  /// Every record is re-validated.
  std::vector<Annotation> export_labels(std::string_view task_id) const;
  std::string export_jsonl(std::string_view task_id) const;

  /// Agreement over control items for each pair of annotators that labeled
  /// any control item. Fewer than two such annotators is an error.
  std::vector<ControlAgreement> control_agreement(std::string_view task_id) const;

  static std::string utc_now();

 private:
  struct TaskState {
    AnnotationTask task;
    std::map<std::string, std::size_t> index;  // ref -> item position
    // (item position, annotator) -> current label
    std::map<std::pair<std::size_t, std::string>, Annotation> labels;
  };

  const TaskState& state(std::string_view task_id) const;
  std::filesystem::path task_path(std::string_view task_id) const;
  std::filesystem::path log_path(std::string_view task_id) const;
  void load();

  std::filesystem::path dir_;
  Clock clock_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, TaskState, std::less<>> tasks_;
};

/// HTTP JSON front end for an AnnotationStore.
///   GET  /tasks                       task summaries
///   POST /tasks                       create a task
///   GET  /tasks/{id}/next?annotator=  next item (replace=1, after=<ref>)
///   POST /tasks/{id}/labels           submit one annotation
///   GET  /tasks/{id}/export           JSON lines
///   GET  /tasks/{id}/agreement        control agreement
/// A non-empty token must be sent in the X-Annotation-Token header.
class AnnotationServer {
 public:
  AnnotationServer(std::shared_ptr<AnnotationStore> store, std::string token = {});
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  int start(const std::string& host = "127.0.0.1", int port = 0);
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP status for an error code raised by the store.
int http_status(Errc code);

}  // namespace dblex::annotation
