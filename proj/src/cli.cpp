#include "sqlp/cli.hpp"

#include "sqlp/io.hpp"
#include "sqlp/ipm.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>

namespace sqlp::cli {

namespace {

int exit_code(Status s) {
  switch (s) {
    case Status::Optimal: return kExitOptimal;
    case Status::MaxIter:
    case Status::SlowProgress: return kExitNotConverged;
    case Status::PrimalInfeasible:
    case Status::DualInfeasible: return kExitInfeasible;
    case Status::NumericalFailure: return kExitNumerical;
  }
  return kExitNumerical;
}

std::string format_row(const IterationRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%3d %9.2e %9.2e %9.2e %9.2e %9.2e %9.2e %9.2e  %s", r.iter,
                r.mu, r.sigma, r.alpha_p, r.alpha_d, r.relgap, r.pinfeas, r.dinfeas,
                r.path.empty() ? "-" : r.path.c_str());
  return buf;
}

void print_summary(std::ostream& out, const SolveResult& r) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return std::string(buf);
  };
  out << "status: " << to_string(r.status) << '\n'
      << "iterations: " << r.iterations << '\n'
      << "pobj: " << num(r.pobj) << '\n'
      << "dobj: " << num(r.dobj) << '\n'
      << "gap: " << num(r.gap) << '\n'
      << "relgap: " << num(r.relgap) << '\n'
      << "pinfeas: " << num(r.pinfeas) << '\n'
      << "dinfeas: " << num(r.dinfeas) << '\n';
  if (!r.message.empty()) out << "message: " << r.message << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  SolverOptions opts;
  std::string input;
  std::string direction = "hkm";
  std::string format = "auto";
  std::string output = "text";
  bool quiet = false;
  bool no_preprocess = false;

  CLI::App app{"Primal-dual interior-point solver for semidefinite-quadratic-linear programs",
               "sqlp"};
  app.add_option("input", input, "Problem file (.dat-s SDPA sparse, .json native)")
      ->required();
  app.add_option("--direction", direction, "Search direction")
      ->check(CLI::IsMember({"hkm", "nt"}))
      ->capture_default_str();
  app.add_option("--eps", opts.eps, "Accuracy target")->capture_default_str();
  app.add_option("--max-iters", opts.max_iters, "Iteration limit")->capture_default_str();
  app.add_option("--gamma", opts.gamma, "Step-length damping in (0,1)")->capture_default_str();
  app.add_option("--format", format, "Input format")
      ->check(CLI::IsMember({"auto", "sdpa", "native"}))
      ->capture_default_str();
  app.add_option("--output", output, "Result format on stdout")
      ->check(CLI::IsMember({"text", "structured"}))
      ->capture_default_str();
  app.add_flag("--quiet", quiet, "Suppress the iteration log");
  app.add_flag("--no-preprocess", no_preprocess, "Skip the optional model transformations");
  app.add_option("--seed", opts.seed, "Seed for randomized components")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  opts.direction = *parse_direction(direction);
  opts.preprocess = !no_preprocess;
  if (const auto bad = opts.check(); !bad.empty()) {
    for (const auto& b : bad) err << "error: " << b << '\n';
    return kExitUsage;
  }

  const io::Format fmt =
      format == "sdpa" ? io::Format::Sdpa : format == "native" ? io::Format::Native : io::Format::Auto;
  ProblemData problem;
  try {
    std::vector<std::string> warnings;
    problem = io::load_problem(input, fmt, &warnings);
    if (!quiet) {
      for (const auto& w : warnings) err << "warning: " << w << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << input << ": " << e.what() << '\n';
    return kExitUsage;
  }

  const SolveResult result = ipm::solve(problem, opts);
  if (!quiet) {
    err << kLogHeader << '\n';
    for (const auto& row : result.trace) err << format_row(row) << '\n';
  }
  if (output == "structured") {
    out << io::result_to_json(result, problem.specs) << '\n';
  } else {
    print_summary(out, result);
  }
  return exit_code(result.status);
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace sqlp::cli
