#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vfl/error.hpp"
#include "vfl/runner.hpp"

namespace {

constexpr int kExitMetricFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

// Every computation in this build runs on the calling thread, so the cap can
// only be validated and reported.
int thread_cap() {
  const char* env = std::getenv("VFL_MAX_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw vfl::ConfigError(std::string("VFL_MAX_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<int>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vortex filament runs: eye, polygonal eye, pair reconnection and the analytic checks."};
  std::string config_path;
  std::string output;
  std::string scenario;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--output", output, "output directory (overrides output_dir)");
  app.add_option("--override", overrides, "key=value with a dotted key, e.g. rhs.epsilon=0.03")->take_all();
  app.add_option("--scenario", scenario, "scenario name (overrides the config)");
  CLI11_PARSE(app, argc, argv);

  try {
    const int threads = thread_cap();
    std::ifstream in(config_path);
    if (!in) throw vfl::ConfigError("cannot read config " + config_path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw vfl::ConfigError("config " + config_path + " is not valid JSON");
    for (const auto& o : overrides) vfl::apply_override(doc, o);
    if (!scenario.empty()) doc["scenario"] = scenario;
    if (!output.empty()) doc["output_dir"] = output;

    const auto cfg = vfl::parse_run_config(doc);
    auto result = vfl::execute_scenario(cfg);
    result.manifest.notes.push_back("thread cap " + std::to_string(threads));
    vfl::write_outputs(result.series, result.manifest, cfg.output_dir);

    for (const auto& m : result.manifest.metrics) {
      std::cout << m.name << " = " << vfl::format_double(m.value);
      if (m.gated()) std::cout << (m.passed() ? "  [pass]" : "  [FAIL]");
      std::cout << '\n';
    }
    for (const auto& e : result.manifest.events) {
      std::cout << "reconnection at t = " << vfl::format_double(e.t_rec) << " (node " << e.node_index << ")\n";
    }
    std::cout << "outputs in " << cfg.output_dir.string() << '\n';
    return result.manifest.all_passed() ? 0 : kExitMetricFailed;
  } catch (const vfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const vfl::NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const vfl::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}
