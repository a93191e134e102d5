#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gflab/acceptance.hpp"
#include "gflab/harness.hpp"

namespace {

std::string key_table() {
  std::string s = "Configuration keys (file `key = value`, env override, or --set key=value):\n";
  for (const auto& k : gflab::config_keys()) {
    std::string name = k.name;
    name.resize(std::max<std::size_t>(name.size(), 20), ' ');
    s += "  " + name + gflab::env_name(k.name) + "\n      " + k.help + "\n";
  }
  s += "Precedence: defaults < --config < environment < --set < --seed/--out/--workers.\n";
  s += "Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 statistical failure.\n";
  return s;
}

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> workers;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "flat key = value config file");
  app->add_option("--seed", f.seed, "master seed (default 20240917)");
  app->add_option("--out", f.out, "output directory (default out)");
  app->add_option("--workers", f.workers, "worker threads (default 1)");
  app->add_option("--set", f.sets, "override one key, key=value (repeatable)");
}

gflab::ExperimentConfig build_config(const std::string& experiment, const CommonFlags& f) {
  gflab::ExperimentConfig c;
  if (!f.config.empty()) c = gflab::load_config(f.config, c);
  gflab::apply_env(c);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw gflab::ConfigError("--set expects key=value, got '" + s + "'");
    gflab::set_config_value(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (f.seed) gflab::set_config_value(c, "seed", std::to_string(*f.seed));
  if (!f.out.empty()) gflab::set_config_value(c, "output_dir", f.out);
  if (f.workers) gflab::set_config_value(c, "workers", std::to_string(*f.workers));
  if (c.supplied.count("experiment") && c.experiment != experiment)
    throw gflab::ConfigError("config names experiment '" + c.experiment + "' but subcommand is '" + experiment + "'");
  gflab::set_config_value(c, "experiment", experiment);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Growth-fragmentation laboratory"};
  app.set_version_flag("--version", std::string(gflab::kVersion));
  app.require_subcommand(1);
  app.footer(key_table());

  std::vector<std::pair<std::string, CommonFlags>> exps;
  exps.reserve(gflab::experiment_names().size());
  std::vector<CLI::App*> subs;
  for (const auto& name : gflab::experiment_names()) {
    exps.emplace_back(name, CommonFlags{});
    CLI::App* s = app.add_subcommand(name, "run the " + name + " experiment");
    add_common(s, exps.back().second);
    subs.push_back(s);
  }

  gflab::AcceptanceOptions aopt;
  std::vector<int> crit;
  bool strict = false;
  CLI::App* acc = app.add_subcommand("acceptance", "run the acceptance criteria");
  acc->add_option("--seed", aopt.seed, "master seed")->capture_default_str();
  acc->add_option("--out", aopt.out, "output directory")->capture_default_str();
  acc->add_option("--workers", aopt.workers, "worker threads")->capture_default_str();
  acc->add_option("--criteria", crit, "subset of criteria 1..11 (default all)")->delimiter(',');
  acc->add_option("--scale", aopt.scale, "sample-size multiplier for smoke runs")->capture_default_str();
  acc->add_flag("--strict", strict, "exit 4 when any criterion fails");

  std::string q_in, q_out;
  gflab::LevyConfig lcfg;
  CLI::App* ps = app.add_subcommand("psi", "evaluate Psi on a CSV column `q`, writing `q,psi`");
  ps->add_option("input", q_in, "input CSV with header q, - for stdin")->required();
  ps->add_option("--out", q_out, "output CSV (default stdout)");
  ps->add_option("--quadrature-tol", lcfg.quadrature_tol, "quadrature tolerance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : gflab::kExitConfig;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      const auto cfg = build_config(exps[i].first, exps[i].second);
      const int rc = gflab::run(cfg);
      std::cout << (rc == 0 ? "PASS " : "FAIL ") << cfg.experiment << " -> " << cfg.output_dir << "\n";
      return rc;
    }
    if (acc->parsed()) {
      for (int k : crit)
        if (k < 1 || k > 11) throw gflab::ConfigError("--criteria: criteria are numbered 1..11");
      aopt.criteria.insert(crit.begin(), crit.end());
      if (!(aopt.scale > 0.0 && aopt.scale <= 1.0)) throw gflab::ConfigError("--scale must lie in (0, 1]");
      if (aopt.workers == 0) throw gflab::ConfigError("--workers must be positive");
      const auto res = gflab::run_acceptance(aopt, std::cout);
      const bool all = std::all_of(res.begin(), res.end(), [](const auto& r) { return r.pass(); });
      return strict && !all ? gflab::kExitStatistical : gflab::kExitOk;
    }
    if (ps->parsed()) {
      lcfg.validate();
      std::vector<double> q;
      if (q_in == "-") {
        q = gflab::read_q_csv(std::cin);
      } else {
        std::ifstream in(q_in);
        if (!in) throw gflab::ConfigError("cannot open " + q_in);
        q = gflab::read_q_csv(in);
      }
      if (q_out.empty()) {
        gflab::write_psi_csv(std::cout, q, lcfg);
      } else {
        std::ofstream out(q_out, std::ios::binary);
        if (!out) throw gflab::ConfigError("cannot write " + q_out);
        gflab::write_psi_csv(out, q, lcfg);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    return gflab::error_exit(e, std::cerr);
  }
  return 0;
}
