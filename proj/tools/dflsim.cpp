// dflsim: run, validate and certify decentralized learning experiments.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dfl/certification.hpp"
#include "dfl/config.hpp"
#include "dfl/experiment.hpp"
#include "dfl/metrics.hpp"

namespace {

using namespace dfl;

void print_warnings(const RunConfig& config) {
  for (const auto& w : config.warnings) std::cerr << "warning: " << w << '\n';
}

int report_error(const std::exception& e) {
  std::cerr << "error: " << e.what() << '\n';
  return exit_code_for(e);
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out,
            const std::string& format) {
  RunConfig config = parse_config(path);
  if (seed) config.seed = *seed;
  if (!out.empty()) config.output_path = out;
  if (!format.empty()) config.format = parse_metrics_format(format);
  if (config.output_path.empty()) config.output_path = "-";
  print_warnings(config);

  const RunResult result = run_experiment(config);
  const auto& s = result.summary;
  if (s.alpha && !s.certified) std::cerr << "UNCERTIFIED: step-size/delay certificate fails\n";
  if (result.exit_code != kExitOk) {
    std::cerr << "error: " << result.error << '\n';
    return result.exit_code;
  }
  std::fprintf(stderr, "iterations %lld, converged_at %s, objective %.17g, consensus_gap %.3g\n",
               static_cast<long long>(s.iterations_run),
               s.convergence.converged_at ? std::to_string(*s.convergence.converged_at).c_str() : "none",
               s.final_objective, s.final_consensus_gap);
  return kExitOk;
}

int cmd_validate(const std::string& path) {
  const RunConfig config = parse_config(path);
  print_warnings(config);
  std::cout << "ok: " << to_string(config.algorithm) << ", " << config.clients << " clients, "
            << to_string(config.loss.kind) << " loss\n";
  return kExitOk;
}

int cmd_certify(const std::string& path) {
  const RunConfig config = parse_config(path);
  print_warnings(config);
  const Problem problem = build_problem(config);
  const auto inputs = problem.certificate_inputs();
  const AlphaReport report = check_assumption3(inputs, config.gate);
  std::printf("gate: %s\n", std::string(to_string(report.gate)).c_str());
  std::printf("%6s %14s %14s %6s %16s %16s %14s %s\n", "client", "eta", "M", "T", "alpha_paper",
              "alpha_conserv", "eta-7M", "result");
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::printf("%6zu %14.6g %14.6g %6d %16.9g %16.9g %14.6g %s\n", k + 1, inputs[k].eta,
                inputs[k].lipschitz, inputs[k].staleness_bound, report.alpha_paper[k],
                report.alpha_conservative[k], report.margin[k], report.pass[k] ? "pass" : "FAIL");
  }
  const bool ok = report.all_pass();
  std::printf("%s\n", ok ? "CERTIFIED" : "NOT CERTIFIED");
  return ok ? kExitOk : kExitCertification;
}

int cmd_compare(const std::string& a, const std::string& b, double tol) {
  auto load = [](const std::string& path) {
    std::vector<Vector> rows;
    for (const auto& r : read_metrics(path)) rows.push_back(Eigen::Map<const Vector>(r.data(), static_cast<Index>(r.size())));
    return rows;
  };
  const auto ra = load(a);
  const auto rb = load(b);
  const DeviationReport r = compare_with_oracle(ra, rb, tol);
  std::printf("rows %zu, max deviation %.17g at row %zu column %s\n", ra.size(), r.max_deviation,
              r.iteration, r.iteration == 0 ? "-" : kTraceColumns[r.coordinate]);
  std::printf("%s (tol %.3g)\n", r.within_tolerance ? "MATCH" : "DIFFER", tol);
  return r.within_tolerance ? kExitOk : kExitCertification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path, out, format, file_a, file_b;
  std::uint64_t seed_value = 0;
  double tol = 0.0;

  auto* run = app.add_subcommand("run", "Run an experiment and write per-iteration metrics");
  run->add_option("config", config_path, "Config file")->required();
  auto* seed_opt = run->add_option("--seed", seed_value, "Override the config seed");
  run->add_option("--out", out, "Metrics path ('-' for stdout)");
  run->add_option("--format", format, "Metrics format")->check(CLI::IsMember({"csv", "jsonl"}));

  auto* validate = app.add_subcommand("validate", "Check a config file");
  validate->add_option("config", config_path, "Config file")->required();

  auto* certify = app.add_subcommand("certify", "Print the step-size/delay certificate");
  certify->add_option("config", config_path, "Config file")->required();

  auto* compare = app.add_subcommand("compare", "Compare two metrics files");
  compare->add_option("file_a", file_a)->required();
  compare->add_option("file_b", file_b)->required();
  compare->add_option("--tol", tol, "Allowed max deviation")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) {
      std::optional<std::uint64_t> seed;
      if (*seed_opt) seed = seed_value;
      return cmd_run(config_path, seed, out, format);
    }
    if (*validate) return cmd_validate(config_path);
    if (*certify) return cmd_certify(config_path);
    if (*compare) return cmd_compare(file_a, file_b, tol);
  } catch (const std::exception& e) {
    return report_error(e);
  }
  return kExitUsage;
}
