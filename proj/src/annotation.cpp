#include "dblex/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "dblex/rng.hpp"

namespace dblex::annotation {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(TaskKind kind) { return kind == TaskKind::bitext ? "bitext" : "wordpair"; }

TaskKind parse_task_kind(std::string_view s) {
  if (s == "bitext") return TaskKind::bitext;
  if (s == "wordpair") return TaskKind::wordpair;
  throw Error(Errc::schema_violation, "kind must be bitext or wordpair, got '" + std::string(s) + "'");
}

const std::vector<std::string>& bitext_labels() {
  static const std::vector<std::string> v = {"idk", "n/a", "incomplete", "1", "2", "3", "4", "5"};
  return v;
}

const std::vector<std::string>& factual_values() {
  static const std::vector<std::string> v = {"misses_details", "adds_details", "different_details",
                                             "minor_inconsistency", "major_inconsistency", "n/a"};
  return v;
}

const std::vector<std::string>& wordpair_labels() {
  static const std::vector<std::string> v = {"yes", "no", "idk"};
  return v;
}

namespace {

bool one_of(const std::string& s, const std::vector<std::string>& allowed) {
  return std::find(allowed.begin(), allowed.end(), s) != allowed.end();
}

void require_non_empty(const std::string& value, const char* field) {
  if (value.empty()) throw Error(Errc::schema_violation, std::string(field) + " is required");
}

}  // namespace

void validate(const BitextAnnotation& a) {
  require_non_empty(a.pair_ref, "pair_ref");
  require_non_empty(a.annotator_id, "annotator_id");
  if (!one_of(a.label, bitext_labels())) {
    throw Error(Errc::schema_violation, "label '" + a.label + "' is not one of idk, n/a, incomplete, 1..5");
  }
  if (a.factual && !one_of(*a.factual, factual_values())) {
    throw Error(Errc::schema_violation, "factual '" + *a.factual + "' is not a known value");
  }
  const bool needs_factual = a.label == "2" || a.label == "3" || a.label == "4";
  const bool forbids_factual = a.label == "5" || a.label == "idk" || a.label == "n/a" || a.label == "incomplete";
  if (needs_factual && !a.factual) {
    throw Error(Errc::schema_violation, "factual is required for label " + a.label);
  }
  if (forbids_factual && a.factual) {
    throw Error(Errc::schema_violation, "factual must not be set for label " + a.label);
  }
}

void validate(const WordPairAnnotation& a) {
  require_non_empty(a.entry_ref, "entry_ref");
  require_non_empty(a.annotator_id, "annotator_id");
  if (!one_of(a.label, wordpair_labels())) {
    throw Error(Errc::schema_violation, "label '" + a.label + "' is not one of yes, no, idk");
  }
}

void validate(const Annotation& a) {
  std::visit([](const auto& x) { validate(x); }, a);
}

const std::string& item_ref(const Annotation& a) {
  if (const auto* b = std::get_if<BitextAnnotation>(&a)) return b->pair_ref;
  return std::get<WordPairAnnotation>(a).entry_ref;
}

const std::string& annotator_of(const Annotation& a) {
  return std::visit([](const auto& x) -> const std::string& { return x.annotator_id; }, a);
}

namespace {

const std::string& label_of(const Annotation& a) {
  return std::visit([](const auto& x) -> const std::string& { return x.label; }, a);
}

template <class T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

class Reader {
 public:
  Reader(const json& j, std::set<std::string> allowed) : j_(j) {
    if (!j.is_object()) throw Error(Errc::schema_violation, "annotation must be a JSON object");
    for (const auto& [key, _] : j.items()) {
      if (!allowed.contains(key)) throw Error(Errc::schema_violation, "unknown field '" + key + "'");
    }
  }

  std::string string(const char* key) const {
    const auto it = j_.find(key);
    if (it == j_.end()) return {};
    if (!it->is_string()) throw Error(Errc::schema_violation, std::string(key) + " must be a string");
    return it->get<std::string>();
  }

  std::optional<std::string> optional_string(const char* key) const {
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw Error(Errc::schema_violation, std::string(key) + " must be a string");
    return it->get<std::string>();
  }

  std::optional<bool> optional_bool(const char* key) const {
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return std::nullopt;
    if (!it->is_boolean()) throw Error(Errc::schema_violation, std::string(key) + " must be true or false");
    return it->get<bool>();
  }

  /// Labels 1..5 may arrive as numbers.
  std::string label() const {
    const auto it = j_.find("label");
    if (it == j_.end()) throw Error(Errc::schema_violation, "label is required");
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    if (!it->is_string()) throw Error(Errc::schema_violation, "label must be a string");
    return it->get<std::string>();
  }

 private:
  const json& j_;
};

}  // namespace

json to_json(const Annotation& a) {
  json j = json::object();
  if (const auto* b = std::get_if<BitextAnnotation>(&a)) {
    j["pair_ref"] = b->pair_ref;
    j["annotator_id"] = b->annotator_id;
    j["label"] = b->label;
    put_optional(j, "factual", b->factual);
    put_optional(j, "grammar_differs", b->grammar_differs);
    put_optional(j, "comment", b->comment);
    j["timestamp"] = b->timestamp;
  } else {
    const auto& w = std::get<WordPairAnnotation>(a);
    j["entry_ref"] = w.entry_ref;
    j["annotator_id"] = w.annotator_id;
    j["label"] = w.label;
    put_optional(j, "pos_mismatch", w.pos_mismatch);
    put_optional(j, "partial_match", w.partial_match);
    put_optional(j, "comment", w.comment);
    j["timestamp"] = w.timestamp;
  }
  return j;
}

Annotation annotation_from_json(const json& j, TaskKind kind) {
  if (kind == TaskKind::bitext) {
    const Reader r(j, {"pair_ref", "annotator_id", "label", "factual", "grammar_differs", "comment",
                       "timestamp", "replaced"});
    BitextAnnotation a;
    a.pair_ref = r.string("pair_ref");
    a.annotator_id = r.string("annotator_id");
    a.label = r.label();
    a.factual = r.optional_string("factual");
    a.grammar_differs = r.optional_bool("grammar_differs");
    a.comment = r.optional_string("comment");
    a.timestamp = r.string("timestamp");
    return a;
  }
  const Reader r(j, {"entry_ref", "annotator_id", "label", "pos_mismatch", "partial_match", "comment",
                     "timestamp", "replaced"});
  WordPairAnnotation a;
  a.entry_ref = r.string("entry_ref");
  a.annotator_id = r.string("annotator_id");
  a.label = r.label();
  a.pos_mismatch = r.optional_bool("pos_mismatch");
  a.partial_match = r.optional_bool("partial_match");
  a.comment = r.optional_string("comment");
  a.timestamp = r.string("timestamp");
  return a;
}

bool AnnotationTask::is_control(std::string_view ref) const {
  return std::find(control_refs.begin(), control_refs.end(), ref) != control_refs.end();
}

bool AnnotationTask::serves(std::string_view annotator, std::string_view ref) const {
  if (primary_annotators.empty()) return true;
  if (std::find(primary_annotators.begin(), primary_annotators.end(), annotator) != primary_annotators.end()) {
    return true;
  }
  return is_control(ref);
}

json to_json(const AnnotationTask& t) {
  json items = json::array();
  for (const auto& item : t.items) items.push_back({{"ref", item.ref}, {"context", item.context}});
  return {{"task_id", t.task_id},
          {"kind", to_string(t.kind)},
          {"seed", t.seed},
          {"primary_annotators", t.primary_annotators},
          {"control_refs", t.control_refs},
          {"items", items}};
}

AnnotationTask task_from_json(const json& j) {
  try {
    AnnotationTask t;
    t.task_id = j.at("task_id").get<std::string>();
    t.kind = parse_task_kind(j.at("kind").get<std::string>());
    t.seed = j.value("seed", std::uint64_t{0});
    t.primary_annotators = j.value("primary_annotators", std::vector<std::string>{});
    t.control_refs = j.value("control_refs", std::vector<std::string>{});
    for (const auto& item : j.at("items")) {
      TaskItem ti;
      ti.ref = item.at("ref").get<std::string>();
      ti.context = item.value("context", json::object());
      t.items.push_back(std::move(ti));
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(Errc::schema_violation, std::string("malformed task: ") + e.what());
  }
}

namespace {

bool valid_task_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
           c == '_' || c == '.';
  }) && id.front() != '.';
}

}  // namespace

AnnotationTask create_task(std::string task_id, TaskKind kind, std::vector<TaskItem> items,
                           std::size_t control_size, std::uint64_t seed,
                           std::vector<std::string> primary_annotators) {
  if (!valid_task_id(task_id)) {
    throw Error(Errc::schema_violation, "task_id must be 1-128 characters of [A-Za-z0-9._-]");
  }
  if (items.empty()) throw Error(Errc::schema_violation, "a task needs at least one item");
  if (control_size > items.size()) {
    throw Error(Errc::schema_violation, "control size " + std::to_string(control_size) + " exceeds " +
                                            std::to_string(items.size()) + " items");
  }
  std::set<std::string_view> seen;
  for (const auto& item : items) {
    if (item.ref.empty()) throw Error(Errc::schema_violation, "item ref is empty");
    if (!seen.insert(item.ref).second) throw Error(Errc::schema_violation, "duplicate item ref '" + item.ref + "'");
  }
  AnnotationTask t;
  t.task_id = std::move(task_id);
  t.kind = kind;
  t.seed = seed;
  t.primary_annotators = std::move(primary_annotators);
  Rng rng(seed);
  for (std::size_t i : sample_indices(items.size(), control_size, rng)) t.control_refs.push_back(items[i].ref);
  t.items = std::move(items);
  return t;
}

// ---------------------------------------------------------------------------

std::string AnnotationStore::utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

AnnotationStore::AnnotationStore(fs::path dir, Clock clock) : dir_(std::move(dir)), clock_(std::move(clock)) {
  if (!clock_) clock_ = &AnnotationStore::utc_now;
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(Errc::io_error, "cannot create " + dir_.string() + ": " + ec.message());
  load();
}

fs::path AnnotationStore::task_path(std::string_view task_id) const {
  return dir_ / (std::string(task_id) + ".task.json");
}

fs::path AnnotationStore::log_path(std::string_view task_id) const {
  return dir_ / (std::string(task_id) + ".labels.jsonl");
}

void AnnotationStore::load() {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    const auto name = entry.path().filename().string();
    if (name.size() > 10 && name.ends_with(".task.json")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(Errc::io_error, "cannot parse " + path.string() + ": " + e.what());
    }
    TaskState st;
    st.task = task_from_json(j);
    for (std::size_t i = 0; i < st.task.items.size(); ++i) st.index.emplace(st.task.items[i].ref, i);

    std::ifstream log(log_path(st.task.task_id));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(log, line)) {
      ++line_no;
      if (line.empty()) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::exception&) {
        // A crash can leave a partial last line; anything else is corruption.
        if (log.peek() == std::char_traits<char>::eof()) break;
        throw Error(Errc::io_error, log_path(st.task.task_id).string() + ":" + std::to_string(line_no) +
                                        ": malformed log line");
      }
      Annotation a = annotation_from_json(rec, st.task.kind);
      const auto it = st.index.find(item_ref(a));
      if (it == st.index.end()) continue;
      st.labels.insert_or_assign({it->second, annotator_of(a)}, std::move(a));
    }
    const std::string id = st.task.task_id;
    tasks_.insert_or_assign(id, std::move(st));
  }
}

const AnnotationStore::TaskState& AnnotationStore::state(std::string_view task_id) const {
  const auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw Error(Errc::not_found, "no task '" + std::string(task_id) + "'");
  return it->second;
}

std::vector<AnnotationTask> AnnotationStore::tasks() const {
  std::shared_lock lock(mutex_);
  std::vector<AnnotationTask> out;
  for (const auto& [_, st] : tasks_) out.push_back(st.task);
  return out;
}

AnnotationTask AnnotationStore::task(std::string_view task_id) const {
  std::shared_lock lock(mutex_);
  return state(task_id).task;
}

void AnnotationStore::add_task(const AnnotationTask& task) {
  std::unique_lock lock(mutex_);
  if (tasks_.contains(task.task_id) || fs::exists(task_path(task.task_id))) {
    throw Error(Errc::conflict, "task '" + task.task_id + "' already exists");
  }
  const fs::path tmp = task_path(task.task_id).string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << to_json(task).dump(2) << '\n';
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp.string());
  }
  fs::rename(tmp, task_path(task.task_id));
  TaskState st;
  st.task = task;
  for (std::size_t i = 0; i < task.items.size(); ++i) st.index.emplace(task.items[i].ref, i);
  tasks_.emplace(task.task_id, std::move(st));
}

NextItem AnnotationStore::next_item(std::string_view task_id, std::string_view annotator,
                                    const NextOptions& options) const {
  if (annotator.empty()) throw Error(Errc::schema_violation, "annotator is required");
  std::shared_lock lock(mutex_);
  const TaskState& st = state(task_id);
  const std::string who(annotator);

  std::size_t start = 0;
  if (options.after) {
    const auto it = st.index.find(*options.after);
    if (it == st.index.end()) throw Error(Errc::not_found, "no item '" + *options.after + "' in task");
    start = it->second + 1;
  }

  NextItem out;
  for (std::size_t i = 0; i < st.task.items.size(); ++i) {
    const auto& item = st.task.items[i];
    if (!st.task.serves(who, item.ref)) continue;
    ++out.assigned;
    const bool labeled = st.labels.contains({i, who});
    out.labeled += labeled;
    if (out.item || i < start) continue;
    if (labeled && !options.replace) continue;
    out.done = false;
    out.item = item;
    out.control = st.task.is_control(item.ref);
    out.already_labeled = labeled;
  }
  return out;
}

SubmitResult AnnotationStore::submit(std::string_view task_id, Annotation annotation) {
  std::unique_lock lock(mutex_);
  const auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw Error(Errc::not_found, "no task '" + std::string(task_id) + "'");
  TaskState& st = it->second;

  const bool kind_ok = std::holds_alternative<BitextAnnotation>(annotation) == (st.task.kind == TaskKind::bitext);
  if (!kind_ok) throw Error(Errc::schema_violation, "annotation kind does not match task kind " + to_string(st.task.kind));
  std::visit([&](auto& a) {
    if (a.timestamp.empty()) a.timestamp = clock_();
  }, annotation);
  validate(annotation);

  const std::string& ref = item_ref(annotation);
  const auto pos = st.index.find(ref);
  if (pos == st.index.end()) throw Error(Errc::not_found, "item '" + ref + "' is not part of task");
  const std::string& who = annotator_of(annotation);
  if (!st.task.serves(who, ref)) {
    throw Error(Errc::schema_violation, "item '" + ref + "' is not assigned to annotator '" + who + "'");
  }

  SubmitResult result;
  result.replaced = st.labels.contains({pos->second, who});
  result.record = to_json(annotation);
  if (result.replaced) result.record["replaced"] = true;

  std::ofstream log(log_path(task_id), std::ios::app | std::ios::binary);
  log << result.record.dump() << '\n';
  log.flush();
  if (!log) throw Error(Errc::io_error, "cannot append to " + log_path(task_id).string());

  st.labels.insert_or_assign({pos->second, who}, std::move(annotation));
  return result;
}

std::vector<Annotation> AnnotationStore::export_labels(std::string_view task_id) const {
  std::shared_lock lock(mutex_);
  const TaskState& st = state(task_id);
  std::vector<Annotation> out;
  out.reserve(st.labels.size());
  for (const auto& [_, a] : st.labels) {
    validate(a);
    out.push_back(a);
  }
  return out;
}

std::string AnnotationStore::export_jsonl(std::string_view task_id) const {
  std::string out;
  for (const auto& a : export_labels(task_id)) out += to_json(a).dump() + "\n";
  return out;
}

std::vector<ControlAgreement> AnnotationStore::control_agreement(std::string_view task_id) const {
  std::shared_lock lock(mutex_);
  const TaskState& st = state(task_id);
  std::map<std::string, std::map<std::string, std::string>> by_annotator;
  for (const auto& [key, a] : st.labels) {
    const auto& ref = st.task.items[key.first].ref;
    if (!st.task.is_control(ref)) continue;
    by_annotator[key.second][ref] = label_of(a);
  }
  if (by_annotator.size() < 2) {
    throw Error(Errc::insufficient_annotators,
                std::to_string(by_annotator.size()) + " annotator(s) labeled control items; need 2");
  }
  const auto task_kind = st.task.kind == TaskKind::bitext ? eval::AgreementTask::likert : eval::AgreementTask::binary;
  std::vector<ControlAgreement> out;
  for (auto a = by_annotator.begin(); a != by_annotator.end(); ++a) {
    for (auto b = std::next(a); b != by_annotator.end(); ++b) {
      out.push_back({a->first, b->first, eval::agreement(a->second, b->second, task_kind)});
    }
  }
  return out;
}

int http_status(Errc code) {
  switch (code) {
    case Errc::schema_violation: return 422;
    case Errc::not_found: return 404;
    case Errc::conflict:
    case Errc::insufficient_annotators:
    case Errc::no_overlap: return 409;
    case Errc::unauthorized: return 401;
    case Errc::invalid_argument: return 400;
    default: return 500;
  }
}

}  // namespace dblex::annotation
