#include "bellsim/cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "bellsim/chsh.hpp"
#include "bellsim/diagnostics.hpp"
#include "bellsim/errors.hpp"
#include "bellsim/fit.hpp"
#include "bellsim/service.hpp"
#include "bellsim/session_io.hpp"
#include "bellsim/tuning.hpp"

namespace bellsim {
namespace {

using nlohmann::json;

struct CommonSim {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Simulator configuration (JSON)");
    cmd->add_option("--seed", seed, "Override the configured RNG seed");
    cmd->add_option("--duration", duration, "Acquisition time per setting, seconds");
  }

  io::SessionConfig load() const {
    io::SessionConfig cfg = config_path.empty() ? io::SessionConfig{} : io::load_config(config_path);
    if (seed) cfg.apparatus.rng_seed = *seed;
    if (duration) cfg.duration_s = *duration;
    if (!(cfg.duration_s > 0.0)) throw ValidationError("--duration must be > 0");
    return cfg;
  }
};

void write_json(const std::string& path, const json& doc) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << doc.dump(2) << "\n";
  if (!f) throw IoError("write failed for '" + path + "'");
}

void print_chsh(std::ostream& out, const est::ChshResult& r) {
  out << std::fixed << std::setprecision(5);
  out << "E(a,b)   = " << r.e_ab << "\n"
      << "E(a,b')  = " << r.e_abp << "\n"
      << "E(a',b)  = " << r.e_apb << "\n"
      << "E(a',b') = " << r.e_apbp << "\n";
  out << std::setprecision(4) << "S        = " << r.s_value << " +/- " << r.sigma_s << "\n";
  out << std::setprecision(2) << "violation: " << (r.violates_bound() ? "yes" : "no") << " ("
      << r.violation_significance() << " standard deviations beyond |S| = 2)\n";
  out.unsetf(std::ios::floatfield);
}

ChshAngles parse_angles(const std::vector<double>& v) {
  if (v.empty()) return ChshAngles::canonical();
  if (v.size() != 4) throw ValidationError("--angles takes four values: a,a',b,b'");
  return {v[0], v[1], v[2], v[3]};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulated two-crystal entangled-photon source and Bell-test analysis"};
  app.require_subcommand(1);

  // scan
  CommonSim scan_sim;
  std::vector<double> scan_alphas{0.0, 45.0, 90.0, 135.0};
  double beta_start = 0.0, beta_stop = 360.0, beta_step = 10.0;
  std::string scan_out = "scan.csv", scan_plot = "scan_plot.json";
  auto* scan = app.add_subcommand("scan", "Sweep beta at fixed alphas; write counts and plot data");
  scan_sim.attach(scan);
  scan->add_option("--alphas", scan_alphas, "Signal analyzer angles, degrees")->delimiter(',');
  scan->add_option("--beta-start", beta_start, "First beta, degrees")->capture_default_str();
  scan->add_option("--beta-stop", beta_stop, "Exclusive upper end of the beta sweep")->capture_default_str();
  scan->add_option("--beta-step", beta_step, "Beta increment, degrees")->capture_default_str();
  scan->add_option("--out", scan_out, "CSV count table");
  scan->add_option("--plot", scan_plot, "Plot-data JSON");

  // bell
  CommonSim bell_sim;
  std::string bell_counts, bell_json;
  std::vector<double> bell_angles;
  bool bell_smooth = false;
  auto* bell = app.add_subcommand("bell", "CHSH S and its uncertainty from 16 settings");
  bell_sim.attach(bell);
  bell->add_option("--counts", bell_counts, "16-row count table (CSV)");
  bell->add_option("--angles", bell_angles, "a,a',b,b' in degrees")->delimiter(',');
  bell->add_option("--json", bell_json, "Write the result document here");
  bell->add_flag("--smooth", bell_smooth, "Add one to every count before error propagation");

  // diagnose
  std::vector<double> diag_counts;
  std::string diag_json;
  auto* diagnose = app.add_subcommand("diagnose", "State parameters from N(0,0) N(90,90) N(0,90) N(45,45)");
  diagnose->add_option("counts", diag_counts, "N(0,0) N(90,90) N(0,90) N(45,45)")
      ->expected(4)
      ->required();
  diagnose->add_option("--json", diag_json, "Write the result document here");

  // fit
  std::string fit_path, fit_json;
  bool fit_shift = false;
  auto* fit = app.add_subcommand("fit", "Least-squares fit of the count model to a scan");
  fit->add_option("scan", fit_path, "Count table (CSV)")->required();
  fit->add_flag("--beta-shift", fit_shift, "Also fit a constant beta offset");
  fit->add_option("--json", fit_json, "Also write the result document here");

  // tune
  CommonSim tune_sim;
  int tune_budget = 200;
  std::optional<double> tune_theta, tune_phi;
  auto* tune = app.add_subcommand("tune", "Automated two-phase tuning of the pump dials");
  tune_sim.attach(tune);
  tune->add_option("--budget", tune_budget, "Maximum number of acquisitions")->capture_default_str();
  tune->add_option("--initial-theta", tune_theta, "Starting laser polarizer dial, degrees");
  tune->add_option("--initial-phi", tune_phi, "Starting quartz plate dial, degrees");

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve live sessions over HTTP (/v1)");
  serve->add_option("--host", host, "Interface to listen on")->capture_default_str();
  serve->add_option("--port", port, "TCP port; 0 picks a free one")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::validation);
  }

  try {
    if (scan->parsed()) {
      const io::SessionConfig cfg = scan_sim.load();
      if (!(beta_step > 0.0)) throw ValidationError("--beta-step must be > 0");
      std::vector<std::pair<double, double>> settings;
      for (double alpha : scan_alphas) {
        for (double beta = beta_start; beta < beta_stop - 1e-9; beta += beta_step) {
          settings.emplace_back(alpha, beta);
        }
      }
      if (settings.empty()) throw ValidationError("scan has no settings");
      sim::LiveSession session(cfg.apparatus, cfg.source, cfg.initial);
      const auto records = session.run_protocol(settings, cfg.duration_s);
      io::save_counts(scan_out, records);

      const auto state = session.current_state();
      json series = json::array();
      for (double alpha : scan_alphas) {
        json points = json::array();
        for (const auto& r : records) {
          if (r.alpha != alpha) continue;
          points.push_back({{"beta_deg", r.beta},
                            {"n_coinc", r.n_coinc},
                            {"sigma", std::sqrt(static_cast<double>(r.n_coinc))},
                            {"expected", sim::mean_coincidences(cfg.apparatus, state, r.alpha,
                                                                r.beta, r.duration_t)}});
        }
        series.push_back({{"alpha_deg", alpha}, {"points", points}});
      }
      write_json(scan_plot, json{{"schema_version", "bellsim.scan_plot/1"},
                                 {"inputs_digest", io::content_digest(records)},
                                 {"series", series}});
      out << "wrote " << records.size() << " records to " << scan_out << " and plot data to "
          << scan_plot << "\n";
      return 0;
    }

    if (bell->parsed()) {
      std::vector<sim::CountRecord> records;
      ChshAngles angles = parse_angles(bell_angles);
      if (!bell_counts.empty()) {
        if (!bell_sim.config_path.empty()) {
          throw ValidationError("bell takes either --counts or --config, not both");
        }
        records = io::load_counts(bell_counts);
      } else {
        const io::SessionConfig cfg = bell_sim.load();
        if (bell_angles.empty()) angles = cfg.angles;
        sim::LiveSession session(cfg.apparatus, cfg.source, cfg.initial);
        records = session.run_protocol(chsh_settings(angles), cfg.duration_s);
      }
      const std::string digest = io::content_digest(records);
      const est::ChshRun run(std::move(records), angles);
      const est::ChshResult result = est::compute_S(run, {bell_smooth});
      print_chsh(out, result);
      if (!bell_json.empty()) io::save_result(result, bell_json, digest);
      return 0;
    }

    if (diagnose->parsed()) {
      const auto d = est::diagnose_state(diag_counts[0], diag_counts[1], diag_counts[2],
                                         diag_counts[3]);
      out << std::fixed << std::setprecision(2) << "C = " << d.c_offset << "  A = " << d.a_pairs
          << "  theta_l = " << d.theta_l << " deg  phi_m = " << d.phi_m << " deg"
          << "  cos(phi_m) = " << std::setprecision(4) << d.cos_phi_m << "\n";
      if (d.interference_out_of_range) {
        out << "warning: interference estimate " << d.raw_cos_phi_m
            << " outside [-1, 1]; clamped\n";
      }
      if (!diag_json.empty()) {
        std::ostringstream in;
        in << diag_counts[0] << "," << diag_counts[1] << "," << diag_counts[2] << ","
           << diag_counts[3];
        io::save_result(d, diag_json, "sha256:" + io::sha256_hex(in.str()));
      }
      return 0;
    }

    if (fit->parsed()) {
      const auto records = io::load_counts(fit_path);
      const auto result = est::fit_nmodel(records, fit_shift);
      const json doc = io::result_document(result, io::content_digest(records));
      out << doc.dump(2) << "\n";
      if (!fit_json.empty()) io::save_result(result, fit_json, io::content_digest(records));
      return 0;
    }

    if (tune->parsed()) {
      io::SessionConfig cfg = tune_sim.load();
      if (!tune_sim.duration) {
        // About 300 expected pairs per acquisition.
        cfg.duration_s = cfg.apparatus.pair_rate > 0.0 ? 300.0 / cfg.apparatus.pair_rate : 1.0;
      }
      if (tune_theta) cfg.initial.theta_l = *tune_theta;
      if (tune_phi) cfg.initial.phi_l = *tune_phi;
      sim::LiveSession session(cfg.apparatus, cfg.source, cfg.initial);
      est::SessionBench bench(session, cfg.duration_s);
      const auto r = est::tune(bench, tune_budget);
      out << std::fixed << std::setprecision(3) << "theta_l setting = " << r.theta_l_setting
          << " deg\nphi_l setting   = " << r.phi_l_setting << " deg\n"
          << "acquisitions    = " << r.acquisitions << "\n"
          << "converged       = " << (r.converged ? "yes" : "no") << "\n";
      if (r.diagnostics) {
        const auto& d = *r.diagnostics;
        out << "diagnostics: C = " << d.c_offset << "  A = " << d.a_pairs
            << "  theta_l = " << d.theta_l << " deg  cos(phi_m) = " << d.cos_phi_m << "\n";
      }
      return r.converged ? 0 : static_cast<int>(ExitCode::runtime);
    }

    if (serve->parsed()) {
      service::SessionRegistry registry;
      service::HttpServer server(registry);
      const int bound = server.bind(host, port);
      if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
      out << "serving /v1 on http://" << host << ":" << bound << std::endl;
      server.serve();
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(exit_code_for(e));
  }
  return 0;
}

}  // namespace bellsim
