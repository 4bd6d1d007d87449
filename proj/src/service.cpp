#include "bellsim/service.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <optional>
#include <random>

#include <httplib.h>

#include "bellsim/angle.hpp"
#include "bellsim/chsh.hpp"
#include "bellsim/diagnostics.hpp"
#include "bellsim/errors.hpp"

namespace bellsim::service {
namespace {

using nlohmann::json;

constexpr std::string_view kPrefix = "/v1";

ApiResponse error(int status, const std::string& message) {
  return {status, json{{"error", {{"status", status}, {"message", message}}}}};
}

json parse_body(std::string_view body) {
  if (body.empty()) return json::object();
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
  }
}

/// Reads an optional numeric field, rejecting anything else in the object.
class BodyReader {
 public:
  explicit BodyReader(const json& body) : body_(body) {
    if (!body_.is_object()) throw ValidationError("body: expected a JSON object");
  }
  std::optional<double> number(const char* key) {
    allowed_.push_back(key);
    auto it = body_.find(key);
    if (it == body_.end()) return std::nullopt;
    if (!it->is_number()) throw ValidationError(std::string("body.") + key + ": expected a number");
    return it->get<double>();
  }
  const json* object(const char* key) {
    allowed_.push_back(key);
    auto it = body_.find(key);
    if (it == body_.end()) return nullptr;
    if (!it->is_object()) throw ValidationError(std::string("body.") + key + ": expected an object");
    return &*it;
  }
  void finish() const {
    for (const auto& [key, value] : body_.items()) {
      if (std::find(allowed_.begin(), allowed_.end(), key) == allowed_.end()) {
        throw ValidationError("body." + key + ": unknown field");
      }
    }
  }

 private:
  const json& body_;
  std::vector<std::string> allowed_;
};

bool same_setting(const sim::CountRecord& r, double alpha, double beta) {
  return folded_distance_deg(r.alpha, alpha) < 1e-6 && folded_distance_deg(r.beta, beta) < 1e-6;
}

std::string new_token(Engine& engine) {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(engine()),
                static_cast<unsigned long long>(engine()));
  return buf;
}

}  // namespace

SessionRegistry::SessionRegistry() : id_engine_(std::random_device{}()) {}

std::string SessionRegistry::create(const io::SessionConfig& config) {
  auto entry = std::make_shared<SessionEntry>();
  entry->config = config;
  entry->session =
      std::make_shared<sim::LiveSession>(config.apparatus, config.source, config.initial);
  std::lock_guard lock(mutex_);
  std::string id;
  do {
    id = new_token(id_engine_);
  } while (sessions_.count(id));
  sessions_.emplace(id, std::move(entry));
  return id;
}

std::shared_ptr<const SessionEntry> SessionRegistry::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

bool SessionRegistry::erase(const std::string& id) {
  std::lock_guard lock(mutex_);
  return sessions_.erase(id) > 0;
}

std::size_t SessionRegistry::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

ApiResponse Api::handle(std::string_view method, std::string_view path, std::string_view body) {
  try {
    if (path.substr(0, kPrefix.size()) != kPrefix) return error(404, "no such route");
    path.remove_prefix(kPrefix.size());
    if (path == "/health" && method == "GET") {
      return {200, json{{"status", "ok"}, {"sessions", registry_.size()}}};
    }
    if (path == "/sessions") {
      if (method == "POST") return create_session(body);
      return error(405, "method not allowed");
    }
    constexpr std::string_view kSessions = "/sessions/";
    if (path.substr(0, kSessions.size()) == kSessions) {
      path.remove_prefix(kSessions.size());
      const auto slash = path.find('/');
      const std::string id(path.substr(0, slash));
      const std::string_view action =
          slash == std::string_view::npos ? std::string_view{} : path.substr(slash + 1);
      return session_route(method, id, action, body);
    }
    return error(404, "no such route");
  } catch (const SequencingError& e) {
    return error(409, e.what());
  } catch (const ValidationError& e) {
    return error(400, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

ApiResponse Api::create_session(std::string_view body) {
  const io::SessionConfig config = io::parse_config(parse_body(body));
  const std::string id = registry_.create(config);
  return {201, json{{"id", id}, {"config", io::to_json(config)}}};
}

ApiResponse Api::session_route(std::string_view method, const std::string& id,
                               std::string_view action, std::string_view body) {
  const auto entry = registry_.find(id);
  if (!entry) return error(404, "unknown session '" + id + "'");
  sim::LiveSession& session = *entry->session;

  if (action.empty()) {
    if (method == "DELETE") {
      registry_.erase(id);
      return {200, json{{"id", id}, {"deleted", true}}};
    }
    if (method == "GET") {
      return {200, json{{"id", id},
                        {"config", io::to_json(entry->config)},
                        {"settings", io::to_json(session.settings())},
                        {"photon_budget", session.photon_budget()},
                        {"record_count", session.history().size()}}};
    }
    return error(405, "method not allowed");
  }

  if (action == "settings" && method == "POST") {
    const json doc = parse_body(body);
    BodyReader r(doc);
    sim::BenchSettings s = session.settings();
    if (auto v = r.number("theta_l")) s.theta_l = *v;
    if (auto v = r.number("phi_l")) s.phi_l = *v;
    if (auto v = r.number("alpha")) s.alpha = *v;
    if (auto v = r.number("beta")) s.beta = *v;
    r.finish();
    session.set_settings(s);
    return {200, io::to_json(s)};
  }
  if (action == "settings" && method == "GET") return {200, io::to_json(session.settings())};

  if (action == "acquire" && method == "POST") {
    const json doc = parse_body(body);
    BodyReader r(doc);
    const double duration = r.number("duration_s").value_or(entry->config.duration_s);
    r.finish();
    return {200, io::to_json(session.acquire(duration))};
  }

  if (action == "records" && method == "GET") {
    json records = json::array();
    for (const auto& rec : session.history()) records.push_back(io::to_json(rec));
    return {200, json{{"records", records}}};
  }

  if (action == "diagnostics" && method == "GET") {
    const auto history = session.history();
    constexpr std::array<std::pair<double, double>, 4> kSettings{
        {{0.0, 0.0}, {90.0, 90.0}, {0.0, 90.0}, {45.0, 45.0}}};
    std::array<double, 4> rates{};
    std::string missing;
    for (std::size_t k = 0; k < kSettings.size(); ++k) {
      const auto [alpha, beta] = kSettings[k];
      auto it = std::find_if(history.rbegin(), history.rend(),
                             [&](const auto& rec) { return same_setting(rec, alpha, beta); });
      if (it == history.rend()) {
        if (!missing.empty()) missing += ", ";
        missing += "(" + std::to_string(static_cast<int>(alpha)) + ", " +
                   std::to_string(static_cast<int>(beta)) + ")";
      } else {
        rates[k] = static_cast<double>(it->n_coinc) / it->duration_t;
      }
    }
    if (!missing.empty()) {
      return error(409, "diagnostics need acquisitions at settings: " + missing);
    }
    // Scale rates to the session's nominal window so counts read naturally.
    const double t = entry->config.duration_s;
    const auto d = est::diagnose_state(rates[0] * t, rates[1] * t, rates[2] * t, rates[3] * t);
    return {200, io::to_json(d)};
  }

  if (action == "chsh" && method == "POST") {
    const json doc = parse_body(body);
    BodyReader r(doc);
    const double duration = r.number("duration_s").value_or(entry->config.duration_s);
    ChshAngles angles = entry->config.angles;
    if (const json* a = r.object("angles")) {
      BodyReader ar(*a);
      angles.a = ar.number("a").value_or(angles.a);
      angles.a_prime = ar.number("a_prime").value_or(angles.a_prime);
      angles.b = ar.number("b").value_or(angles.b);
      angles.b_prime = ar.number("b_prime").value_or(angles.b_prime);
      ar.finish();
    }
    r.finish();
    const auto settings = chsh_settings(angles);
    auto records = session.run_protocol(settings, duration);
    json rows = json::array();
    for (const auto& rec : records) rows.push_back(io::to_json(rec));
    const est::ChshRun run(std::move(records), angles);
    return {200, json{{"result", io::to_json(est::compute_S(run))}, {"records", rows}}};
  }

  return error(404, "no such route");
}

HttpServer::HttpServer(SessionRegistry& registry)
    : api_(registry), server_(std::make_unique<httplib::Server>()) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse out = api_.handle(req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  server_->Get(".*", forward);
  server_->Post(".*", forward);
  server_->Delete(".*", forward);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host.c_str());
  return server_->bind_to_port(host.c_str(), port) ? port : -1;
}

bool HttpServer::serve() { return server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

}  // namespace bellsim::service
