#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "bellsim/service.hpp"

using namespace bellsim;
using nlohmann::json;

namespace {

const std::filesystem::path kWire = std::filesystem::path(BELLSIM_FIXTURE_DIR) / "wire";

json wire_fixture(const std::string& name) {
  std::ifstream in(kWire / (name + ".json"));
  REQUIRE(in.good());
  return json::parse(in);
}

// True when `actual` has the same keys and JSON value kinds as `schema`,
// recursively; arrays are checked element-wise against the schema's first
// element. Integers and floats both count as numbers.
bool same_shape(const json& schema, const json& actual, std::string& where) {
  if (schema.is_number() && actual.is_number()) return true;
  if (schema.type() != actual.type()) {
    where += " (type " + std::string(actual.type_name()) + ", want " + schema.type_name() + ")";
    return false;
  }
  if (schema.is_object()) {
    if (schema.size() != actual.size()) {
      where += " (keys " + actual.dump().substr(0, 80) + ")";
      return false;
    }
    for (const auto& [key, value] : schema.items()) {
      if (!actual.contains(key)) {
        where += "." + key + " missing";
        return false;
      }
      std::string sub = where + "." + key;
      if (!same_shape(value, actual[key], sub)) {
        where = sub;
        return false;
      }
    }
  }
  if (schema.is_array() && !schema.empty()) {
    for (std::size_t i = 0; i < actual.size(); ++i) {
      std::string sub = where + "[" + std::to_string(i) + "]";
      if (!same_shape(schema[0], actual[i], sub)) {
        where = sub;
        return false;
      }
    }
  }
  return true;
}

void check_shape(const std::string& fixture, const json& actual) {
  std::string where = fixture;
  CHECK_MESSAGE(same_shape(wire_fixture(fixture), actual, where), where);
}

json tuned_config(std::uint64_t seed) {
  return json{{"schema_version", "bellsim.config/1"},
              {"apparatus", {{"rng_seed", seed}}},
              {"source", {{"theta_l", 45.0}, {"phi_l", 0.0}, {"crystal_phase", 0.0}, {"coherence", 0.9}}}};
}

json ideal_config(std::uint64_t seed) {
  return json{{"schema_version", "bellsim.config/1"},
              {"apparatus",
               {{"rng_seed", seed},
                {"pair_rate", 1000.0},
                {"coincidence_window_tau", 0.0},
                {"background_coinc_rate", 0.0}}},
              {"source", {{"coherence", 1.0}}}};
}

struct Fixture {
  service::SessionRegistry registry;
  service::Api api{registry};

  service::ApiResponse call(std::string_view method, const std::string& path, const json& body = {}) {
    return api.handle(method, path, body.is_null() ? "" : body.dump());
  }
  std::string create(const json& config) {
    const auto r = call("POST", "/v1/sessions", config);
    REQUIRE(r.status == 201);
    return r.body["id"].get<std::string>();
  }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "health and session lifecycle") {
  auto health = call("GET", "/v1/health");
  CHECK(health.status == 200);
  CHECK(health.body["sessions"] == 0);
  check_shape("health", health.body);

  const auto created = call("POST", "/v1/sessions", tuned_config(1));
  CHECK(created.status == 201);
  check_shape("session_created", created.body);
  const std::string id = created.body["id"];

  const auto got = call("GET", "/v1/sessions/" + id);
  CHECK(got.status == 200);
  CHECK(got.body["settings"]["theta_l"] == 45.0);
  check_shape("session", got.body);

  const auto other = create(tuned_config(2));
  CHECK(other != id);
  CHECK(registry.size() == 2);

  CHECK(call("DELETE", "/v1/sessions/" + id).status == 200);
  CHECK(call("POST", "/v1/sessions/" + id + "/acquire", json{{"duration_s", 1.0}}).status == 404);
  CHECK(call("GET", "/v1/sessions/" + id).status == 404);
  CHECK(call("DELETE", "/v1/sessions/" + id).status == 404);
  CHECK(registry.size() == 1);
}

TEST_CASE_FIXTURE(Fixture, "settings, acquisition and history") {
  const auto id = create(tuned_config(3));
  const auto set = call("POST", "/v1/sessions/" + id + "/settings", json{{"alpha", 45.0}, {"beta", 45.0}});
  CHECK(set.status == 200);
  CHECK(set.body["alpha"] == 45.0);
  CHECK(set.body["theta_l"] == 45.0);
  check_shape("settings", set.body);
  CHECK(call("GET", "/v1/sessions/" + id + "/settings").body == set.body);

  const auto rec = call("POST", "/v1/sessions/" + id + "/acquire", json{{"duration_s", 2.0}});
  CHECK(rec.status == 200);
  CHECK(rec.body["alpha_deg"] == 45.0);
  CHECK(rec.body["duration_s"] == 2.0);
  check_shape("record", rec.body);

  const auto default_t = call("POST", "/v1/sessions/" + id + "/acquire", json::object());
  CHECK(default_t.body["duration_s"] == 15.0);

  const auto records = call("GET", "/v1/sessions/" + id + "/records");
  CHECK(records.body["records"].size() == 2);
  check_shape("records", records.body);
}

TEST_CASE_FIXTURE(Fixture, "malformed requests") {
  const auto id = create(tuned_config(4));
  auto bad = api.handle("POST", "/v1/sessions/" + id + "/settings", "{not json");
  CHECK(bad.status == 400);
  check_shape("error", bad.body);

  bad = call("POST", "/v1/sessions/" + id + "/settings", json{{"alpha", "ninety"}});
  CHECK(bad.status == 400);
  CHECK(bad.body["error"]["message"].get<std::string>().find("alpha") != std::string::npos);

  bad = call("POST", "/v1/sessions/" + id + "/settings", json{{"gamma", 1.0}});
  CHECK(bad.status == 400);
  CHECK(bad.body["error"]["message"].get<std::string>().find("gamma") != std::string::npos);

  bad = call("POST", "/v1/sessions/" + id + "/acquire", json{{"duration_s", -1.0}});
  CHECK(bad.status == 400);

  bad = call("POST", "/v1/sessions", json{{"schema_version", "bellsim.config/1"}, {"apparatus", {{"pair_rat", 1}}}});
  CHECK(bad.status == 400);
  CHECK(bad.body["error"]["message"].get<std::string>().find("apparatus.pair_rat") != std::string::npos);

  CHECK(call("GET", "/v2/health").status == 404);
  CHECK(call("GET", "/v1/sessions/" + id + "/nothing").status == 404);
}

TEST_CASE_FIXTURE(Fixture, "overlapping acquisitions are rejected with 409") {
  const auto id = create(tuned_config(5));
  const auto entry = registry.find(id);
  {
    sim::LiveSession::StepGuard guard(*entry->session);
    const auto r = call("POST", "/v1/sessions/" + id + "/acquire", json{{"duration_s", 1.0}});
    CHECK(r.status == 409);
    check_shape("error", r.body);
    CHECK(call("POST", "/v1/sessions/" + id + "/chsh", json::object()).status == 409);
  }
  CHECK(call("POST", "/v1/sessions/" + id + "/acquire", json{{"duration_s", 1.0}}).status == 200);
}

TEST_CASE_FIXTURE(Fixture, "diagnostics end to end") {
  const auto id = create(tuned_config(6));
  const auto incomplete = call("GET", "/v1/sessions/" + id + "/diagnostics");
  CHECK(incomplete.status == 409);

  for (auto [a, b] : {std::pair{0.0, 0.0}, std::pair{90.0, 90.0}, std::pair{0.0, 90.0}, std::pair{45.0, 45.0}}) {
    REQUIRE(call("POST", "/v1/sessions/" + id + "/settings", json{{"alpha", a}, {"beta", b}}).status == 200);
    REQUIRE(call("POST", "/v1/sessions/" + id + "/acquire", json{{"duration_s", 200.0}}).status == 200);
  }
  const auto d = call("GET", "/v1/sessions/" + id + "/diagnostics");
  REQUIRE(d.status == 200);
  check_shape("diagnostics", d.body);
  CHECK(std::abs(d.body["theta_l"].get<double>() - 45.0) < 1.0);
  // Poisson σ of cos φ_m here is about 0.016.
  CHECK(std::abs(d.body["cos_phi_m"].get<double>() - 0.9) < 0.065);
  // C collects background and accidentals: 15 s × (1.0 + 25 ns × 5800 × 5400)/s.
  CHECK(std::abs(d.body["c_offset"].get<double>() - 15.0 * (1.0 + 25e-9 * 5800 * 5400)) < 5.0);
}

TEST_CASE_FIXTURE(Fixture, "CHSH wizard on a near-ideal source") {
  const auto id = create(ideal_config(7));
  const auto r = call("POST", "/v1/sessions/" + id + "/chsh", json{{"duration_s", 100.0}});
  REQUIRE(r.status == 200);
  check_shape("chsh", r.body);
  CHECK(r.body["records"].size() == 16);
  const double s = r.body["result"]["s_value"];
  const double sigma = r.body["result"]["sigma_s"];
  CHECK(std::abs(s - 2.0 * std::sqrt(2.0)) < 3.0 * sigma);
  CHECK(r.body["result"]["violates_bound"] == true);

  const auto flat = call("POST", "/v1/sessions/" + id + "/chsh",
                         json{{"duration_s", 100.0}, {"angles", {{"a", 0.0}, {"a_prime", 0.0}, {"b", 0.0}, {"b_prime", 0.0}}}});
  CHECK(flat.status == 400);
  CHECK(flat.body["error"]["message"].get<std::string>().find("duplicate") != std::string::npos);

  // With no background the ideal source leaves some cells empty, which
  // sigma_S rejects; a realistic source has counts everywhere.
  const auto other_id = create(tuned_config(9));
  const auto other = call("POST", "/v1/sessions/" + other_id + "/chsh",
                          json{{"duration_s", 100.0}, {"angles", {{"a", 0.0}, {"a_prime", 45.0}, {"b", 0.0}, {"b_prime", 45.0}}}});
  REQUIRE(other.status == 200);
  CHECK(std::abs(other.body["result"]["s_value"].get<double>()) < 2.0 + 3.0 * other.body["result"]["sigma_s"].get<double>());
}

TEST_CASE("HTTP round trip") {
  service::SessionRegistry registry;
  service::HttpServer server(registry);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread serving([&] { server.serve(); });

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);
  auto health = client.Get("/v1/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Content-Type") == "application/json");

  auto created = client.Post("/v1/sessions", tuned_config(8).dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string id = json::parse(created->body)["id"];

  auto rec = client.Post("/v1/sessions/" + id + "/acquire", R"({"duration_s": 1})", "application/json");
  REQUIRE(rec);
  CHECK(rec->status == 200);
  CHECK(json::parse(rec->body)["duration_s"] == 1.0);

  auto gone = client.Delete("/v1/sessions/" + id);
  REQUIRE(gone);
  CHECK(gone->status == 200);
  auto missing = client.Get("/v1/sessions/" + id + "/records");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["error"]["status"] == 404);

  server.stop();
  serving.join();
  CHECK(registry.size() == 0);
}

TEST_CASE("a fresh registry starts empty") {
  service::SessionRegistry registry;
  service::Api api(registry);
  CHECK(api.handle("GET", "/v1/health", "").body["sessions"] == 0);
}
