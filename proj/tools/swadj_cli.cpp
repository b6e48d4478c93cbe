// Command-line driver: run, adjoint-only, compare-gauges, emit-xt.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <iostream>

#include "CLI11.hpp"
#include "swadj/scenario.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

/// Leftover "--section.key=value" arguments become config overrides.
std::vector<std::string> collect_overrides(const std::vector<std::string>& extras) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < extras.size(); ++k) {
    std::string a = extras[k];
    if (a.rfind("--", 0) != 0) throw swadj::ConfigError("unexpected argument '" + a + "'");
    a = a.substr(2);
    if (a.find('=') == std::string::npos) {
      if (k + 1 >= extras.size()) throw swadj::ConfigError("override '--" + a + "' needs a value");
      a += "=" + extras[++k];
    }
    out.push_back(a);
  }
  return out;
}

swadj::ScenarioConfig load(const std::string& path, const std::vector<std::string>& extras,
                           bool serial) {
  auto overrides = collect_overrides(extras);
  if (serial) overrides.push_back("amr.threads=1");
  return swadj::load_config(path, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adjoint-guided AMR for the linearized shallow water equations"};
  app.require_subcommand(1);

  std::string config;
  bool serial = false;

  auto* run = app.add_subcommand("run", "adjoint phase (if needed) then forward AMR run");
  run->add_option("config", config, "scenario file")->required();
  run->add_flag("--serial", serial, "single-threaded, deterministic execution");
  run->allow_extras();

  auto* adj = app.add_subcommand("adjoint-only", "solve and save the adjoint snapshots only");
  adj->add_option("config", config, "scenario file")->required();
  adj->add_flag("--serial", serial, "single-threaded, deterministic execution");
  adj->allow_extras();

  std::string reference;
  std::vector<std::string> runs;
  std::string report_path;
  auto* cmp = app.add_subcommand("compare-gauges", "compare gauge CSVs against a reference");
  cmp->add_option("--reference", reference, "reference gauge CSV")->required();
  cmp->add_option("runs", runs, "gauge CSVs to compare")->required();
  cmp->add_option("--out", report_path, "write the JSON report here instead of stdout");

  std::string run_dir;
  double threshold = 0.1;
  auto* xt = app.add_subcommand("emit-xt", "write x-t masks for a finished 1D run");
  xt->add_option("run_dir", run_dir, "output directory of a run")->required();
  xt->add_option("--threshold", threshold, "mask threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      const auto cfg = load(config, run->remaining(), serial);
      const auto res = swadj::run(cfg);
      std::cout << res.report.to_json().dump(2) << '\n';
    } else if (*adj) {
      auto cfg = load(config, adj->remaining(), serial);
      if (!cfg.has_functional) throw swadj::ConfigError("adjoint-only needs a [functional] section");
      namespace fs = std::filesystem;
      fs::create_directories(cfg.output_dir);
      std::ofstream(fs::path(cfg.output_dir) / "config_used.cfg") << swadj::format_config(cfg);
      const auto t0 = std::chrono::steady_clock::now();
      const auto bathy = swadj::make_bathymetry(cfg);
      cfg.adjoint_store.clear();
      const auto store = swadj::adjoint_phase(cfg, bathy);
      const fs::path dir = fs::path(cfg.output_dir) / "adjoint";
      store->save(dir);
      nlohmann::json j;
      j["snapshot_dir"] = dir.string();
      j["snapshots"] = store->size();
      j["wall_time_seconds"] = {
          {"adjoint", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
      std::cout << j.dump(2) << '\n';
    } else if (*cmp) {
      const auto ref = swadj::read_gauge_csv(reference);
      nlohmann::json j;
      j["reference"] = reference;
      for (const auto& r : runs) j["runs"][r] = swadj::compare_gauges(swadj::read_gauge_csv(r), ref).to_json();
      if (report_path.empty()) {
        std::cout << j.dump(2) << '\n';
      } else {
        std::ofstream out(report_path);
        if (!out) throw swadj::ConfigError("cannot write '" + report_path + "'");
        out << j.dump(2) << '\n';
      }
    } else if (*xt) {
      for (const auto& p : swadj::emit_xt_aggregate(run_dir, threshold)) std::cout << p << '\n';
    }
  } catch (const swadj::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const swadj::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
