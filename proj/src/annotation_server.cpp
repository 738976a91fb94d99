#include <thread>

#include <httplib.h>

#include "dblex/annotation.hpp"

namespace dblex::annotation {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& detail) {
  send_json(res, status, {{"error", code}, {"detail", detail}});
}

json summary(const AnnotationTask& t) {
  return {{"task_id", t.task_id},
          {"kind", to_string(t.kind)},
          {"n_items", t.items.size()},
          {"n_control", t.control_refs.size()},
          {"primary_annotators", t.primary_annotators}};
}

json agreement_json(const std::vector<ControlAgreement>& pairs) {
  json out = json::array();
  for (const auto& p : pairs) {
    json r = {{"annotator_a", p.annotator_a},
              {"annotator_b", p.annotator_b},
              {"n_items", p.report.n_items},
              {"exact_match", p.report.exact_match_rate}};
    r["pearson_r"] = p.report.pearson_r ? json(*p.report.pearson_r) : json(nullptr);
    out.push_back(std::move(r));
  }
  return {{"pairs", out}};
}

AnnotationTask task_from_request(const json& body) {
  if (!body.is_object()) throw Error(Errc::schema_violation, "task body must be an object");
  try {
    std::vector<TaskItem> items;
    for (const auto& item : body.at("items")) {
      if (item.is_string()) {
        items.push_back({item.get<std::string>(), json::object()});
      } else {
        items.push_back({item.at("ref").get<std::string>(), item.value("context", json::object())});
      }
    }
    const std::size_t control = body.contains("control_size")
                                    ? body.at("control_size").get<std::size_t>()
                                    : std::min(kDefaultControlSize, items.size());
    return create_task(body.at("task_id").get<std::string>(),
                       parse_task_kind(body.at("kind").get<std::string>()), std::move(items), control,
                       body.value("seed", std::uint64_t{0}),
                       body.value("primary_annotators", std::vector<std::string>{}));
  } catch (const json::exception& e) {
    throw Error(Errc::schema_violation, std::string("malformed task: ") + e.what());
  }
}

}  // namespace

struct AnnotationServer::Impl {
  std::shared_ptr<AnnotationStore> store;
  std::string token;
  httplib::Server server;
  std::thread thread;
};

AnnotationServer::AnnotationServer(std::shared_ptr<AnnotationStore> store, std::string token)
    : impl_(std::make_unique<Impl>()) {
  impl_->store = std::move(store);
  impl_->token = std::move(token);
  Impl* impl = impl_.get();
  auto& server = impl_->server;

  server.set_pre_routing_handler([impl](const httplib::Request& req, httplib::Response& res) {
    if (impl->token.empty() || req.get_header_value(kTokenHeader) == impl->token) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    send_error(res, 401, errc_name(Errc::unauthorized), std::string("missing or wrong ") + kTokenHeader);
    return httplib::Server::HandlerResponse::Handled;
  });

  // Every handler body runs inside this wrapper so store errors map to
  // statuses uniformly.
  auto guarded = [](auto&& fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), errc_name(e.code()), e.detail());
      } catch (const json::exception& e) {
        send_error(res, 400, "bad_request", e.what());
      }
    };
  };

  server.Get("/tasks", guarded([impl](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& t : impl->store->tasks()) out.push_back(summary(t));
    send_json(res, 200, {{"tasks", out}});
  }));

  server.Post("/tasks", guarded([impl](const httplib::Request& req, httplib::Response& res) {
    const AnnotationTask task = task_from_request(json::parse(req.body));
    impl->store->add_task(task);
    json body = summary(task);
    body["control_refs"] = task.control_refs;
    send_json(res, 201, body);
  }));

  server.Get(R"(/tasks/([^/]+)/next)", guarded([impl](const httplib::Request& req, httplib::Response& res) {
    const std::string annotator = req.get_param_value("annotator");
    NextOptions options;
    const std::string replace = req.get_param_value("replace");
    options.replace = replace == "1" || replace == "true";
    if (req.has_param("after")) options.after = req.get_param_value("after");
    const NextItem next = impl->store->next_item(req.matches[1].str(), annotator, options);
    json body = {{"done", next.done}, {"labeled", next.labeled}, {"assigned", next.assigned}};
    if (next.item) {
      body["item"] = {{"ref", next.item->ref}, {"context", next.item->context}};
      body["control"] = next.control;
      body["already_labeled"] = next.already_labeled;
    }
    send_json(res, 200, body);
  }));

  server.Post(R"(/tasks/([^/]+)/labels)", guarded([impl](const httplib::Request& req, httplib::Response& res) {
    const std::string task_id = req.matches[1].str();
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return send_error(res, 400, "bad_request", e.what());
    }
    const TaskKind kind = impl->store->task(task_id).kind;
    const SubmitResult r = impl->store->submit(task_id, annotation_from_json(body, kind));
    send_json(res, 200, {{"accepted", true}, {"replaced", r.replaced}, {"record", r.record}});
  }));

  server.Get(R"(/tasks/([^/]+)/export)", guarded([impl](const httplib::Request& req, httplib::Response& res) {
    res.status = 200;
    res.set_content(impl->store->export_jsonl(req.matches[1].str()), "application/x-ndjson");
  }));

  server.Get(R"(/tasks/([^/]+)/agreement)", guarded([impl](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, agreement_json(impl->store->control_agreement(req.matches[1].str())));
  }));
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start(const std::string& host, int port) {
  auto& server = impl_->server;
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(Errc::io_error, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  return bound;
}

void AnnotationServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(Errc::io_error, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace dblex::annotation
