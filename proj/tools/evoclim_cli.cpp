#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evoclim/error.hpp"
#include "evoclim/harness.hpp"
#include "evoclim/parallel.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kEngineError = 3;

void apply_overrides(evoclim::Scenario& s, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw evoclim::ConfigError(kv, "--set expects key=value");
    auto trim = [](std::string x) {
      x.erase(0, x.find_first_not_of(" \t"));
      x.erase(x.find_last_not_of(" \t") + 1);
      return x;
    };
    evoclim::apply_setting(s, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  s.validate();
}

void summarize(const evoclim::ComparisonReport& r, const std::string& dir) {
  std::printf("scenario %s -> %s\n", r.scenario.name.c_str(), dir.c_str());
  if (r.analytic && !r.analytic->mbar.empty()) {
    std::printf("  analytic mbar(%g) = %.8g\n", r.analytic->times.back(), r.analytic->mbar.back());
  }
  if (r.ibm && !r.ibm->mean_mbar.empty()) {
    std::printf("  ibm      mbar(%g) = %.8g  [%.6g, %.6g]\n", r.ibm->times.back(), r.ibm->mean_mbar.back(),
                r.ibm->q025.back(), r.ibm->q975.back());
  }
  if (r.ide && !r.ide->mbar.empty()) {
    std::printf("  ide      mbar(%g) = %.8g\n", r.ide->times.back(), r.ide->mbar.back());
  }
  for (const auto& d : r.deviations) {
    std::printf("  %s vs %s: sup %.4g, mean %.4g, rel %.4g\n", d.a.c_str(), d.b.c_str(), d.sup, d.mean, d.rel_sup);
  }
  if (r.coverage) std::printf("  band coverage %.4f\n", *r.coverage);
  for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int run_and_write(const evoclim::Scenario& s, const std::string& out) {
  const auto report = evoclim::run_scenario(s);
  evoclim::write_outputs(report, out);
  summarize(report, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  evoclim::configure_threads_from_env();

  CLI::App app{"Adaptation to a moving optimum: analytic, individual-based and grid engines"};
  app.require_subcommand(1);

  std::string config, out, name, axis, values;
  std::vector<std::string> sets;

  auto* run = app.add_subcommand("run", "Run a scenario config");
  run->add_option("config", config, "Scenario file")->required();
  run->add_option("--out", out, "Output directory (default: output.dir)");
  run->add_option("--set", sets, "Override key=value (repeatable)");

  auto* pre = app.add_subcommand("preset", "Run a figure preset");
  pre->add_option("name", name, "fig2a|fig2b|fig2c|fig2d|fig3a|fig3b")->required();
  pre->add_option("--out", out, "Output directory (default: out/<name>)");
  pre->add_option("--set", sets, "Override key=value (repeatable)");
  bool print_config = false;
  pre->add_flag("--print-config", print_config, "Print the resolved config and exit");

  auto* sw = app.add_subcommand("sweep", "Sweep one parameter through the asymptotic analytic limits");
  sw->add_option("config", config, "Base scenario file")->required();
  sw->add_option("--axis", axis, "Dotted parameter path, e.g. params.mu")->required();
  sw->add_option("--values", values, "a,b,c or lo:step:hi")->required();
  sw->add_option("--out", out, "CSV file (default: stdout)");

  auto* val = app.add_subcommand("validate", "Parse and validate a config");
  val->add_option("config", config, "Scenario file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto s = evoclim::load_scenario(config);
      apply_overrides(s, sets);
      return run_and_write(s, out.empty() ? s.output_dir : out);
    }
    if (*pre) {
      auto s = evoclim::preset(name);
      apply_overrides(s, sets);
      if (print_config) {
        std::cout << evoclim::to_config(s);
        return 0;
      }
      return run_and_write(s, out.empty() ? s.output_dir : out);
    }
    if (*sw) {
      const auto s = evoclim::load_scenario(config);
      const auto result = evoclim::sweep(s, axis, evoclim::parse_values(values));
      if (out.empty()) {
        evoclim::write_sweep_csv(std::cout, result);
      } else {
        std::ofstream f(out);
        if (!f) throw std::runtime_error("cannot write '" + out + "'");
        evoclim::write_sweep_csv(f, result);
      }
      if (result.argmax_mbar) std::fprintf(stderr, "argmax mbar_inf: %.10g\n", *result.argmax_mbar);
      if (result.argmin_vm) std::fprintf(stderr, "argmin vm_inf: %.10g\n", *result.argmin_vm);
      return 0;
    }
    if (*val) {
      const auto s = evoclim::load_scenario(config);
      std::cout << evoclim::to_config(s);
      return 0;
    }
  } catch (const evoclim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const evoclim::EngineError& e) {
    std::fprintf(stderr, "engine error: %s\n", e.what());
    return kEngineError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kEngineError;
  }
  return 0;
}
