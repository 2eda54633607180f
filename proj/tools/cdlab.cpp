// cdlab command-line driver.
//
//   cdlab validate-domain [--config F] [--out DIR]
//   cdlab local-check     [--config F] [--eps E] [--trials N] [--seed S] [--Nprime N'] [--threads T] [--svg] [--out DIR]
//   cdlab failure-demo    [--config F] [--K K] [--svg] [--out DIR]
//   cdlab solve           --mu0 A.csv --mu1 B.csv [--config F] [--out DIR]
//   cdlab calibrate       [--config F] [--eps E]
//
// Exit codes: 0 expected verdict, 1 verdict not reached, 2 invalid input.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "cdlab/cdcheck.hpp"
#include "cdlab/io.hpp"

namespace fs = std::filesystem;
using namespace cdlab;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> eps;
  std::optional<std::int64_t> trials;
  std::optional<double> K;
  std::optional<double> n_prime;
  std::optional<int> threads;
  bool svg = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--eps", f.eps, "grid resolution");
  cmd->add_option("--trials", f.trials, "number of trials");
  cmd->add_option("--K", f.K, "curvature parameter");
  cmd->add_option("--Nprime", f.n_prime, "entropy exponent N' (inf allowed)");
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--svg", f.svg, "emit an SVG figure");
}

io::Config load_config(const CommonFlags& f) {
  return f.config.empty() ? io::Config{} : io::Config::load(f.config);
}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
  fs::create_directories(dir);
  std::ofstream out(fs::path(dir) / name, std::ios::binary);
  if (!out) throw io::InputError("cannot write " + (fs::path(dir) / name).string());
  out << content;
}

std::string out_dir(const CommonFlags& f) { return f.out.empty() ? std::string(".") : f.out; }

int cmd_validate_domain(const CommonFlags& f) {
  const auto cfg = load_config(f);
  const auto e = io::corner_domain_from(cfg);
  const double step = cfg.get_double("grid_step", 1e-5);
  const auto report = validate_corner_domain(e, step);
  const std::string text = io::to_json(report).dump() + "\n";
  std::cout << text;
  if (!f.out.empty()) write_file(f.out, "validation.json", text);
  return report.valid() ? 0 : 1;
}

std::optional<Family> parse_family(const std::string& s) {
  if (s.empty() || s == "mixed") return std::nullopt;
  if (s == "random") return Family::Random;
  if (s == "strips") return Family::Strips;
  if (s == "identical") return Family::Identical;
  throw io::InputError("unknown family: " + s);
}

LocalConfig local_config(const CommonFlags& f) {
  const auto cfg = load_config(f);
  LocalConfig c;
  c.domain = io::corner_domain_from(cfg);
  c.ball_center = {cfg.get_double("ball_x", c.ball_center.x), cfg.get_double("ball_y", c.ball_center.y)};
  c.ball_radius = cfg.get_double("ball_radius", c.ball_radius);
  c.eps = f.eps.value_or(cfg.get_double("eps", c.eps));
  c.trials = f.trials.value_or(cfg.get_int("trials", c.trials));
  c.seed = f.seed.value_or(static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<std::int64_t>(c.seed))));
  c.subdiv = static_cast<int>(cfg.get_int("subdiv", c.subdiv));
  c.mid_factor = cfg.get_double("mid_factor", c.mid_factor);
  const std::string spread = cfg.get_string("spread", "cell");
  if (spread == "cell") c.spread = Spread::Cell;
  else if (spread == "point") c.spread = Spread::Point;
  else throw io::InputError("unknown spread: " + spread);
  c.n_primes = f.n_prime ? std::vector<double>{*f.n_prime} : cfg.get_doubles("nprime", c.n_primes);
  c.family = parse_family(cfg.get_string("family", ""));
  c.strip_every = static_cast<int>(cfg.get_int("strip_every", c.strip_every));
  c.companion_eps = cfg.get_double("companion_eps", c.companion_eps);
  c.face_tol = cfg.get_double("face_tol", c.face_tol);
  c.threads = f.threads.value_or(static_cast<int>(cfg.get_int("threads", c.threads)));
  c.allowance.base = cfg.get_double("allowance_base", c.allowance.base);
  c.allowance.c4 = cfg.get_double("allowance_c4", c.allowance.c4);
  c.allowance.c8 = cfg.get_double("allowance_c8", c.allowance.c8);
  c.allowance.c_inf = cfg.get_double("allowance_cinf", c.allowance.c_inf);
  c.allowance.c_other = cfg.get_double("allowance_cother", c.allowance.c_other);
  if (c.trials < 1) throw io::InputError("trials must be >= 1");
  if (!(c.eps > 0.0) || c.subdiv < 1 || !(c.mid_factor > 0.0) || c.threads < 1) {
    throw io::InputError("eps, subdiv, mid_factor and threads must be positive");
  }
  for (double np : c.n_primes) {
    if (!(np > 1.0)) throw io::InputError("N' must be > 1");
  }
  return c;
}

int cmd_local_check(const CommonFlags& f) {
  const LocalConfig c = local_config(f);
  const auto reports = local_cd04_experiment(c);
  const double target = *std::min_element(c.n_primes.begin(), c.n_primes.end());
  std::string text;
  bool ok = true;
  for (const auto& r : reports) {
    text += io::to_json(r).dump() + "\n";
    if (r.N == target && !r.satisfied) ok = false;
  }
  std::cout << text;
  if (!f.out.empty()) write_file(f.out, "reports.jsonl", text);
  if (f.svg) {
    const auto trial = make_trial(c, 0);
    const auto plan = refine_lexicographic(trial.mu0, trial.mu1, c.face_tol);
    const auto [assignment, mu_half] = pushforward_midpoint(c.domain, plan, c.mid_factor * c.eps, c.spread);
    write_file(out_dir(f), "local.svg", io::local_svg(c.domain, assignment));
    if (!f.out.empty()) {
      std::ostringstream csv;
      io::write_midpoints_csv(csv, assignment);
      write_file(f.out, "midpoints.csv", csv.str());
    }
  }
  return ok ? 0 : 1;
}

int cmd_failure_demo(const CommonFlags& f) {
  const auto cfg = load_config(f);
  const double K = f.K.value_or(cfg.get_double("K", 1.0));
  const double h = cfg.get_double("h", 0.01);
  const double l = cfg.get_double("l", 2.0);
  const double a0 = cfg.get_double("A0", 0.01);
  FailureOptions opt;
  opt.search = cfg.get_bool("search", opt.search);
  opt.ramp_slope = cfg.get_double("ramp_slope", opt.ramp_slope);
  opt.grid_fraction = cfg.get_double("grid_fraction", opt.grid_fraction);
  if (!(h > 0.0)) throw io::InputError("h must be > 0");
  const auto demo = global_failure_demo(K, h, l, a0, opt);
  const std::string text = io::to_json(demo).dump() + "\n";
  std::cout << text;
  if (!f.out.empty()) write_file(f.out, "failure.json", text);
  if (f.svg) write_file(out_dir(f), "failure.svg", io::failure_svg(demo));
  return demo.certified ? 0 : 1;
}

int cmd_solve(const CommonFlags& f, std::string mu0_path, std::string mu1_path) {
  const auto cfg = load_config(f);
  if (mu0_path.empty()) mu0_path = cfg.get_string("mu0", "");
  if (mu1_path.empty()) mu1_path = cfg.get_string("mu1", "");
  if (mu0_path.empty() || mu1_path.empty()) throw io::InputError("solve needs --mu0 and --mu1");
  const auto mu0 = io::read_measure_csv(mu0_path);
  const auto mu1 = io::read_measure_csv(mu1_path);
  if (std::abs(mu0.total_mass() - mu1.total_mass()) > 1e-12) throw io::InputError("total masses differ");
  const double face_tol = cfg.get_double("face_tol", 1e-9);
  const std::string stage = cfg.get_string("stage", "opt3");
  Stage upto = Stage::Opt3;
  if (stage == "opt1") upto = Stage::Opt1;
  else if (stage == "opt2") upto = Stage::Opt2;
  else if (stage != "opt3") throw io::InputError("unknown stage: " + stage);
  const auto plan = refine_lexicographic(mu0, mu1, face_tol, upto);
  const std::string audit = io::audit_json(plan).dump() + "\n";
  std::cout << audit;
  if (!f.out.empty()) {
    std::ostringstream csv;
    io::write_plan_csv(csv, plan);
    write_file(f.out, "plan.csv", csv.str());
    write_file(f.out, "audit.json", audit);
  }
  return 0;
}

int cmd_calibrate(const CommonFlags& f) {
  const LocalConfig c = local_config(f);
  std::string text;
  for (double eps : {c.eps, 0.5 * c.eps, 0.25 * c.eps}) {
    for (const auto& r : calibrate_translation(c, eps)) {
      nlohmann::json row = {{"eps", eps}, {"N", io::real(r.n_prime)}, {"margin", r.margin}, {"C", r.margin / eps}};
      text += row.dump() + "\n";
    }
  }
  std::cout << text;
  if (!f.out.empty()) write_file(f.out, "calibration.jsonl", text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curvature-dimension checks on l-infinity corner domains"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string mu0_path;
  std::string mu1_path;

  auto* validate = app.add_subcommand("validate-domain", "check corner-domain constraints");
  auto* local = app.add_subcommand("local-check", "local CD(0,N') experiment near the arc");
  auto* failure = app.add_subcommand("failure-demo", "certify the CD(K,inf) failure on a neck space");
  auto* solve = app.add_subcommand("solve", "lexicographic optimal transport between two CSV measures");
  auto* calibrate = app.add_subcommand("calibrate", "translation calibration of the allowance constants");
  for (auto* cmd : {validate, local, failure, solve, calibrate}) add_common(cmd, flags);
  solve->add_option("--mu0", mu0_path, "source measure CSV");
  solve->add_option("--mu1", mu1_path, "target measure CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*validate) return cmd_validate_domain(flags);
    if (*local) return cmd_local_check(flags);
    if (*failure) return cmd_failure_demo(flags);
    if (*solve) return cmd_solve(flags, mu0_path, mu1_path);
    if (*calibrate) return cmd_calibrate(flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
