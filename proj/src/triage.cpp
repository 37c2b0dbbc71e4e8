#include "oxgen/triage.hpp"

#include <thread>

#include "httplib.h"
#include "oxgen/error.hpp"
#include "oxgen/fileio.hpp"

namespace oxgen {

using nlohmann::json;
namespace fs = std::filesystem;

struct TriageServer::Impl {
  Impl(CurationLedger& l, std::optional<fs::path> dir) : ledger(l), static_dir(std::move(dir)) {}

  CurationLedger& ledger;
  std::optional<fs::path> static_dir;
  httplib::Server server;
  std::thread thread;
  int port = 0;
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

bool parse_size_param(const httplib::Request& req, const char* key, std::size_t fallback,
                      std::size_t& out) {
  out = fallback;
  if (!req.has_param(key)) return true;
  const std::string v = req.get_param_value(key);
  if (v.empty() || v.size() > 9 || v.find_first_not_of("0123456789") != std::string::npos)
    return false;
  out = static_cast<std::size_t>(std::stoul(v));
  return true;
}

}  // namespace

TriageServer::TriageServer(CurationLedger& ledger, std::optional<fs::path> static_dir)
    : impl_(std::make_unique<Impl>(ledger, std::move(static_dir))) {
  auto& srv = impl_->server;
  CurationLedger& led = impl_->ledger;

  srv.Get("/api/pending", [&led](const httplib::Request& req, httplib::Response& res) {
    std::size_t offset = 0;
    std::size_t limit = 0;
    if (!parse_size_param(req, "offset", 0, offset) ||
        !parse_size_param(req, "limit", kDefaultPageSize, limit) || limit == 0) {
      send_error(res, 400, "offset and limit must be non-negative integers, limit > 0");
      return;
    }
    const auto state = led.snapshot();
    json items = json::array();
    std::size_t total = 0;
    for (const auto& id : state->order) {
      const auto& r = state->records.at(id);
      if (r.decision != Decision::pending) continue;
      if (total >= offset && items.size() < limit) items.push_back(record_json(r));
      ++total;
    }
    send_json(res, 200,
              {{"offset", offset}, {"limit", limit}, {"total", total}, {"items", items}});
  });

  srv.Get(R"(/api/image/([^/]+))", [&led](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto state = led.snapshot();
    auto it = state->records.find(id);
    if (it == state->records.end()) {
      send_error(res, 404, "unknown image id '" + id + "'");
      return;
    }
    if (!led.store_dir()) {
      send_error(res, 404, "ledger has no image store");
      return;
    }
    const fs::path file = *led.store_dir() / it->second.file;
    try {
      const auto bytes = read_binary_file(file);
      res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    } catch (const Error&) {
      send_error(res, 404, "image file missing for '" + id + "'");
    }
  });

  srv.Post("/api/decision", [&led](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      send_error(res, 400, "body is not valid JSON");
      return;
    }
    if (!body.is_object() || !body.contains("image_id") || !body["image_id"].is_string() ||
        !body.contains("decision") || !body["decision"].is_string()) {
      send_error(res, 400, "body needs string fields image_id and decision");
      return;
    }
    const auto decision = parse_decision(body["decision"].get<std::string>());
    if (!decision) {
      send_error(res, 400, "unknown decision");
      return;
    }
    Reason reason = Reason::none;
    if (body.contains("reason") && !body["reason"].is_null()) {
      if (!body["reason"].is_string()) {
        send_error(res, 400, "reason must be a string");
        return;
      }
      const auto r = parse_reason(body["reason"].get<std::string>());
      if (!r) {
        send_error(res, 400, "unknown reason");
        return;
      }
      reason = *r;
    }
    const std::string reviewer =
        body.contains("reviewer") && body["reviewer"].is_string() ? body["reviewer"].get<std::string>()
                                                                 : "triage";
    const std::string id = body["image_id"].get<std::string>();
    if (!led.snapshot()->records.count(id)) {
      send_error(res, 404, "unknown image id '" + id + "'");
      return;
    }
    try {
      send_json(res, 200, record_json(led.record_decision(id, *decision, reason, reviewer)));
    } catch (const InputError& e) {
      send_error(res, 400, e.what());
    }
  });

  srv.Get("/api/summary", [&led](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, summary_json(*led.snapshot()));
  });

  if (impl_->static_dir && !srv.set_mount_point("/", impl_->static_dir->string()))
    throw InputError("static directory not found: " + impl_->static_dir->string());
}

TriageServer::~TriageServer() { stop(); }

void TriageServer::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  // httplib's default sets SO_REUSEPORT, which lets a second server share a busy port.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (port == 0) {
    impl_->port = srv.bind_to_any_port(host);
    if (impl_->port <= 0) throw InputError("cannot bind " + host);
  } else {
    if (!srv.bind_to_port(host, port))
      throw InputError("cannot bind " + host + ":" + std::to_string(port) + " (port busy?)");
    impl_->port = port;
  }
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
}

int TriageServer::port() const { return impl_->port; }

void TriageServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void TriageServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace oxgen
