#include "bellsim/session_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "bellsim/errors.hpp"

namespace bellsim::io {
namespace {

using nlohmann::json;

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_field(std::string_view field, std::size_t line, const char* name) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last || field.empty()) {
    std::ostringstream msg;
    msg << "line " << line << ": cannot parse " << name << " from '" << field << "'";
    throw ValidationError(msg.str());
  }
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// Reads fields out of a JSON object, rejecting any key it was not asked for.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ValidationError(path_or_root() + ": expected a JSON object");
  }

  template <typename T>
  void optional(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ValidationError(field(key) + ": wrong type");
    }
  }

  void number(const char* key, double& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    if (!it->is_number()) throw ValidationError(field(key) + ": expected a number");
    out = it->get<double>();
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) throw ValidationError(field(key.c_str()) + ": unknown field");
    }
  }

 private:
  std::string path_or_root() const { return path_.empty() ? "document" : path_; }
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
void with_field_path(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& j, const char* key) {
  const auto& v = j.at(key);
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

json params_json(const est::FitParameters& p) {
  return json{{"a_pairs", nullable(p.a_pairs)},
              {"c_offset", nullable(p.c_offset)},
              {"theta_l", nullable(p.theta_l)},
              {"cos_phi_m", nullable(p.cos_phi_m)},
              {"beta_shift", p.beta_shift ? nullable(*p.beta_shift) : json(nullptr)}};
}

est::FitParameters params_from(const json& j, bool has_shift) {
  est::FitParameters p{number_or_nan(j, "a_pairs"), number_or_nan(j, "c_offset"),
                       number_or_nan(j, "theta_l"), number_or_nan(j, "cos_phi_m"), std::nullopt};
  if (has_shift) p.beta_shift = number_or_nan(j, "beta_shift");
  return p;
}

}  // namespace

// ---- count tables -------------------------------------------------------

std::vector<sim::CountRecord> parse_counts(std::string_view text) {
  std::vector<sim::CountRecord> out;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    if (!header_seen) {
      if (line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
      if (line != kCountTableHeader) {
        throw ValidationError("line " + std::to_string(line_no) + ": expected header '" +
                              std::string(kCountTableHeader) + "'");
      }
      header_seen = true;
      continue;
    }

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 6) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected 6 fields, found " +
                            std::to_string(fields.size()));
    }
    sim::CountRecord rec;
    rec.alpha = parse_field<double>(fields[0], line_no, "alpha_deg");
    rec.beta = parse_field<double>(fields[1], line_no, "beta_deg");
    rec.duration_t = parse_field<double>(fields[2], line_no, "duration_s");
    rec.n_a = parse_field<std::int64_t>(fields[3], line_no, "n_a");
    rec.n_b = parse_field<std::int64_t>(fields[4], line_no, "n_b");
    rec.n_coinc = parse_field<std::int64_t>(fields[5], line_no, "n_coinc");
    if (!std::isfinite(rec.alpha) || !std::isfinite(rec.beta)) {
      throw ValidationError("line " + std::to_string(line_no) + ": angles must be finite");
    }
    if (!(rec.duration_t > 0.0) || !std::isfinite(rec.duration_t)) {
      throw ValidationError("line " + std::to_string(line_no) + ": duration_s must be > 0");
    }
    if (rec.n_a < 0 || rec.n_b < 0 || rec.n_coinc < 0) {
      throw ValidationError("line " + std::to_string(line_no) + ": counts must be nonnegative");
    }
    out.push_back(rec);
  }
  if (!header_seen) throw ValidationError("line 1: missing header");
  return out;
}

std::string format_counts(std::span<const sim::CountRecord> records) {
  std::string out(kCountTableHeader);
  out += '\n';
  for (const auto& r : records) {
    out += shortest(r.alpha) + ',' + shortest(r.beta) + ',' + shortest(r.duration_t) + ',' +
           std::to_string(r.n_a) + ',' + std::to_string(r.n_b) + ',' +
           std::to_string(r.n_coinc) + '\n';
  }
  return out;
}

std::vector<sim::CountRecord> load_counts(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_counts(text);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_counts(const std::filesystem::path& path, std::span<const sim::CountRecord> records) {
  write_file(path, format_counts(records));
}

// ---- provenance ---------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw RuntimeError("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string content_digest(std::span<const sim::CountRecord> records) {
  return "sha256:" + sha256_hex(format_counts(records));
}

// ---- configuration ------------------------------------------------------

sim::ApparatusConfig SessionConfig::default_apparatus() {
  sim::ApparatusConfig c;
  c.pair_rate = 150.0;
  c.singles_rate_a = 5800.0;
  c.singles_rate_b = 5400.0;
  c.coincidence_window_tau = 25e-9;
  c.background_coinc_rate = 1.0;
  c.beta_offset = 0.0;
  c.phase_spread_mode = sim::PhaseSpreadMode::scalar_cos_phi_m;
  c.rng_seed = 1;
  return c;
}

SessionConfig parse_config(const json& doc) {
  SessionConfig cfg;
  ObjectReader root(doc, "");
  std::string schema;
  root.optional("schema_version", schema);
  if (schema != kConfigSchema) {
    throw ValidationError("schema_version: expected '" + std::string(kConfigSchema) + "'");
  }

  if (const json* j = root.child("apparatus")) {
    ObjectReader r(*j, "apparatus");
    auto& a = cfg.apparatus;
    r.number("pair_rate", a.pair_rate);
    r.number("singles_rate_a", a.singles_rate_a);
    r.number("singles_rate_b", a.singles_rate_b);
    r.number("coincidence_window_tau", a.coincidence_window_tau);
    r.number("background_coinc_rate", a.background_coinc_rate);
    r.number("beta_offset", a.beta_offset);
    std::string mode = a.phase_spread_mode == sim::PhaseSpreadMode::scalar_cos_phi_m
                           ? "scalar_cos_phi_m"
                           : "per_pair_sampling";
    r.optional("phase_spread_mode", mode);
    if (mode == "scalar_cos_phi_m") {
      a.phase_spread_mode = sim::PhaseSpreadMode::scalar_cos_phi_m;
    } else if (mode == "per_pair_sampling") {
      a.phase_spread_mode = sim::PhaseSpreadMode::per_pair_sampling;
    } else {
      throw ValidationError(r.field("phase_spread_mode") +
                            ": expected 'scalar_cos_phi_m' or 'per_pair_sampling'");
    }
    r.optional("rng_seed", a.rng_seed);
    r.finish();
    with_field_path("apparatus", [&] { a.validate(); });
  }
  if (const json* j = root.child("source")) {
    ObjectReader r(*j, "source");
    r.number("theta_l", cfg.initial.theta_l);
    r.number("phi_l", cfg.initial.phi_l);
    r.number("crystal_phase", cfg.source.crystal_phase);
    r.number("coherence", cfg.source.coherence);
    r.finish();
    with_field_path("source", [&] { cfg.source.validate(); });
  }
  if (const json* j = root.child("analyzers")) {
    ObjectReader r(*j, "analyzers");
    r.number("alpha", cfg.initial.alpha);
    r.number("beta", cfg.initial.beta);
    r.finish();
  }
  if (const json* j = root.child("angles")) {
    ObjectReader r(*j, "angles");
    r.number("a", cfg.angles.a);
    r.number("a_prime", cfg.angles.a_prime);
    r.number("b", cfg.angles.b);
    r.number("b_prime", cfg.angles.b_prime);
    r.finish();
  }
  root.number("duration_s", cfg.duration_s);
  if (!(cfg.duration_s > 0.0)) throw ValidationError("duration_s: must be > 0");
  root.finish();
  return cfg;
}

SessionConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

SessionConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_config_text(text);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

json to_json(const SessionConfig& c) {
  const auto& a = c.apparatus;
  return json{
      {"schema_version", kConfigSchema},
      {"apparatus",
       {{"pair_rate", a.pair_rate},
        {"singles_rate_a", a.singles_rate_a},
        {"singles_rate_b", a.singles_rate_b},
        {"coincidence_window_tau", a.coincidence_window_tau},
        {"background_coinc_rate", a.background_coinc_rate},
        {"beta_offset", a.beta_offset},
        {"phase_spread_mode", a.phase_spread_mode == sim::PhaseSpreadMode::scalar_cos_phi_m
                                  ? "scalar_cos_phi_m"
                                  : "per_pair_sampling"},
        {"rng_seed", a.rng_seed}}},
      {"source",
       {{"theta_l", c.initial.theta_l},
        {"phi_l", c.initial.phi_l},
        {"crystal_phase", c.source.crystal_phase},
        {"coherence", c.source.coherence}}},
      {"analyzers", {{"alpha", c.initial.alpha}, {"beta", c.initial.beta}}},
      {"angles",
       {{"a", c.angles.a}, {"a_prime", c.angles.a_prime}, {"b", c.angles.b},
        {"b_prime", c.angles.b_prime}}},
      {"duration_s", c.duration_s},
  };
}

// ---- values -------------------------------------------------------------

json to_json(const sim::CountRecord& r) {
  return json{{"alpha_deg", r.alpha}, {"beta_deg", r.beta}, {"duration_s", r.duration_t},
              {"n_a", r.n_a},         {"n_b", r.n_b},       {"n_coinc", r.n_coinc}};
}

sim::CountRecord record_from_json(const json& j) {
  try {
    return sim::CountRecord{j.at("alpha_deg").get<double>(), j.at("beta_deg").get<double>(),
                            j.at("duration_s").get<double>(), j.at("n_a").get<std::int64_t>(),
                            j.at("n_b").get<std::int64_t>(), j.at("n_coinc").get<std::int64_t>()};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("count record: ") + e.what());
  }
}

json to_json(const sim::BenchSettings& s) {
  return json{{"theta_l", s.theta_l}, {"phi_l", s.phi_l}, {"alpha", s.alpha}, {"beta", s.beta}};
}

json to_json(const est::ChshResult& r) {
  return json{{"e_ab", r.e_ab},
              {"e_abp", r.e_abp},
              {"e_apb", r.e_apb},
              {"e_apbp", r.e_apbp},
              {"s_value", r.s_value},
              {"sigma_s", r.sigma_s},
              {"significance", r.violation_significance()},
              {"violates_bound", r.violates_bound()}};
}

json to_json(const est::StateDiagnostics& d) {
  return json{{"c_offset", d.c_offset},
              {"a_pairs", d.a_pairs},
              {"theta_l", d.theta_l},
              {"phi_m", d.phi_m},
              {"cos_phi_m", d.cos_phi_m},
              {"raw_cos_phi_m", d.raw_cos_phi_m},
              {"interference_out_of_range", d.interference_out_of_range}};
}

json to_json(const est::FitResult& f) {
  return json{{"values", params_json(f.values)},
              {"errors", params_json(f.errors)},
              {"phi_m", nullable(f.phi_m())},
              {"chi_square", f.chi_square},
              {"dof", f.dof},
              {"iterations", f.iterations},
              {"gradient_norm", f.gradient_norm}};
}

// ---- results ------------------------------------------------------------

json result_document(const ResultDocument& result, std::string_view inputs_digest) {
  json doc{{"schema_version", kResultSchema}, {"inputs_digest", inputs_digest}};
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, est::ChshResult>) doc["kind"] = "chsh_result";
        if constexpr (std::is_same_v<T, est::StateDiagnostics>) doc["kind"] = "state_diagnostics";
        if constexpr (std::is_same_v<T, est::FitResult>) doc["kind"] = "fit_result";
        doc["result"] = to_json(r);
      },
      result);
  return doc;
}

void save_result(const ResultDocument& result, const std::filesystem::path& path,
                 std::string_view inputs_digest) {
  write_file(path, result_document(result, inputs_digest).dump(2) + "\n");
}

LoadedResult parse_result(const json& doc) {
  try {
    if (doc.at("schema_version").get<std::string>() != kResultSchema) {
      throw ValidationError("schema_version: expected '" + std::string(kResultSchema) + "'");
    }
    const std::string kind = doc.at("kind").get<std::string>();
    const json& r = doc.at("result");
    LoadedResult out{est::ChshResult{}, doc.at("inputs_digest").get<std::string>()};
    if (kind == "chsh_result") {
      out.result = est::ChshResult{r.at("e_ab").get<double>(),    r.at("e_abp").get<double>(),
                                   r.at("e_apb").get<double>(),   r.at("e_apbp").get<double>(),
                                   r.at("s_value").get<double>(), r.at("sigma_s").get<double>()};
    } else if (kind == "state_diagnostics") {
      est::StateDiagnostics d;
      d.c_offset = r.at("c_offset").get<double>();
      d.a_pairs = r.at("a_pairs").get<double>();
      d.theta_l = r.at("theta_l").get<double>();
      d.phi_m = r.at("phi_m").get<double>();
      d.cos_phi_m = r.at("cos_phi_m").get<double>();
      d.raw_cos_phi_m = r.at("raw_cos_phi_m").get<double>();
      d.interference_out_of_range = r.at("interference_out_of_range").get<bool>();
      out.result = d;
    } else if (kind == "fit_result") {
      const bool has_shift = !r.at("values").at("beta_shift").is_null();
      est::FitResult f;
      f.values = params_from(r.at("values"), has_shift);
      f.errors = params_from(r.at("errors"), has_shift);
      f.chi_square = r.at("chi_square").get<double>();
      f.dof = r.at("dof").get<int>();
      f.iterations = r.at("iterations").get<int>();
      f.gradient_norm = r.at("gradient_norm").get<double>();
      out.result = f;
    } else {
      throw ValidationError("kind: unknown result kind '" + kind + "'");
    }
    return out;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("result document: ") + e.what());
  }
}

LoadedResult load_result(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_result(doc);
}

}  // namespace bellsim::io
