#include <CLI11.hpp>

#include "pxthin/pxthin.hpp"

namespace {

int run_command(const std::string& config) {
  const auto cfg = pxthin::load_config(config);
  const auto res = pxthin::run_experiments(cfg);
  std::cout << "output: " << cfg.output_dir.string() << "\n";
  for (const auto& v : res.violations) std::cerr << "contract violated: " << v << "\n";
  std::cout << "status: " << (res.exit_code == 0 ? "ok" : "violated") << "\n";
  return res.exit_code;
}

int report_command(const std::string& dir) {
  const auto csv = pxthin::aggregate_report(dir);
  const auto path = std::filesystem::path(dir) / "report.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pxthin::InputError("cannot write " + path.string());
  out << csv;
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int verify_command(int trials, std::uint64_t seed) {
  const auto v = pxthin::verify_suite(trials, seed);
  std::cout << "iteration lemma: " << v.iteration.violations << " violations in " << v.iteration.checks
            << " checks, worst slack " << pxthin::fmt_real(v.iteration.worst_slack) << "\n";
  std::cout << "monotonicity: c = " << pxthin::fmt_real(v.monotonicity_constant) << ", worst ratio "
            << pxthin::fmt_real(v.monotonicity_worst) << "\n";
  std::cout << "luxemburg: " << v.luxemburg.failures << " failures over " << v.luxemburg.fields << " fields\n";
  std::cout << "status: " << (v.ok() ? "ok" : "violated") << "\n";
  return v.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pxthin: thin obstacle p(x)-Laplacian solver and verification harness"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "run the experiments selected in a config file");
  run->add_option("config", config, "INI config file")->required();

  std::string dir;
  auto* report = app.add_subcommand("report", "merge summary.txt files under a directory into report.csv");
  report->add_option("dir", dir, "output directory")->required();

  int trials = 10000;
  std::uint64_t seed = 1;
  auto* verify = app.add_subcommand("verify", "run the randomized property suite");
  verify->add_option("--trials", trials, "iteration lemma trials")->check(CLI::NonNegativeNumber);
  verify->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return run_command(config);
    if (*report) return report_command(dir);
    return verify_command(trials, seed);
  } catch (const pxthin::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const pxthin::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
