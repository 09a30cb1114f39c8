// hjlab_cli: experiments on the nonconvex segment-field Hamilton-Jacobi model.
//
// Exit status: 0 success, 1 a checked property failed (or a run error), 2 usage error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hjlab/hjlab.hpp"

namespace {

using namespace hjlab;

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// What a command produced. `ok` false means a checked property did not hold.
struct Output {
  std::string bytes;
  bool ok = true;
  std::string summary;
  std::optional<double> truncation;
};

struct Common {
  std::string seed;
  int kmax = 8;
  std::string out;
  std::string manifest;
  std::string format = "csv";
  int threads = 1;

  Seed128 resolved_seed;

  int thread_count() const {
    if (threads > 0) return threads;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
};

struct EnvOptions {
  std::string planted;
  std::string env_file;
  std::string background = "none";
};

Point parse_point(const std::vector<double>& v, const char* what) {
  if (v.size() != 2) throw UsageError(std::string(what) + " needs two comma-separated numbers");
  return Point{v[0], v[1]};
}

Rect parse_window(const std::vector<double>& v) {
  if (v.size() != 4) throw UsageError("--window needs x0,x1,y0,y1");
  const Rect w{v[0], v[1], v[2], v[3]};
  if (!(w.x1 > w.x0) || !(w.y1 > w.y0)) throw UsageError("--window must have positive width and height");
  return w;
}

Environment make_environment(const Common& common, const EnvOptions& eo, bool default_random) {
  if (!eo.env_file.empty()) return parse_environment_manifest(read_file(eo.env_file));
  if (eo.planted.empty() && eo.background == "none") {
    if (default_random) return Environment::random(common.resolved_seed, common.kmax);
    return Environment::planted({});
  }
  const auto segments = parse_planted(eo.planted);
  if (eo.background == "none") return Environment::planted(segments);
  BackgroundPolicy bg{common.resolved_seed, common.kmax, std::nullopt};
  if (eo.background == "protected") {
    if (segments.empty()) throw UsageError("--background protected needs a planted segment");
    bg.protect = 0;
  } else if (eo.background != "random") {
    throw UsageError("--background must be none, random or protected");
  }
  return Environment::planted(segments, bg);
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "128-bit seed as 32 hex characters (drawn from entropy when absent)");
  sub->add_option("--kmax", c.kmax, "Truncation scale of the random field")->capture_default_str()->check(CLI::Range(1, kMaxScale));
  sub->add_option("--out", c.out, "Output file (stdout when absent)");
  sub->add_option("--manifest", c.manifest, "Run manifest path (default: <out>.manifest.json, stderr without --out)");
  sub->add_option("--format", c.format, "Output format")->capture_default_str()->check(CLI::IsMember({"csv", "pgm"}));
  sub->add_option("--threads", c.threads, "Worker threads (0: all cores); results do not depend on it")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
}

void add_env(CLI::App* sub, EnvOptions& e) {
  sub->add_option("--planted", e.planted, "Planted segments, e.g. \"red,2,0,0;green,1,0,3\"");
  sub->add_option("--env", e.env_file, "Environment manifest (JSON) to load")->check(CLI::ExistingFile);
  sub->add_option("--background", e.background, "Random background under planted segments")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "random", "protected"}));
}

void require_csv(const Common& c, const char* command) {
  if (c.format != "csv") throw UsageError(std::string(command) + " only writes csv");
}

// ---------------------------------------------------------------------------
// Commands

struct RenderOptions {
  EnvOptions env;
  std::vector<double> window{-40.0, 40.0, -40.0, 40.0};
  std::vector<int> res{400, 400};
};

Output run_render(const Common& c, const RenderOptions& o) {
  const Environment env = make_environment(c, o.env, true);
  if (o.res.size() != 2 || o.res[0] < 1 || o.res[1] < 1) throw UsageError("--res needs two positive integers");
  const Raster raster{parse_window(o.window), static_cast<std::size_t>(o.res[0]), static_cast<std::size_t>(o.res[1])};
  Output out;
  out.truncation = truncation_bound(env, raster.window, 0.0);
  if (c.format == "pgm") {
    out.bytes = render(env, raster);
  } else {
    const auto values = sample_weight(env, raster);
    out.bytes = "x,y,c\n";
    for (std::size_t j = 0; j < raster.ny; ++j) {
      for (std::size_t i = 0; i < raster.nx; ++i) {
        const Point p = raster.centre(i, j);
        out.bytes += (CsvRow{} << p.x << p.y << values[j * raster.nx + i]).str();
      }
    }
  }
  return out;
}

struct StatsOptions {
  int k = 1;
  std::size_t n = 100000;
  std::vector<long> shift;
  std::size_t stat_n = 10000;
};

Output run_stats(const Common& c, const StatsOptions& o) {
  require_csv(c, "env stats");
  if (o.k < 1 || o.k > c.kmax) throw UsageError("--k must lie in [1, kmax]");
  const Environment env = Environment::random(c.resolved_seed, c.kmax);
  std::vector<double> counts(o.n);
  for (std::size_t b = 0; b < o.n; ++b) {
    counts[b] = static_cast<double>(env.block_sites(Color::green, o.k, static_cast<std::int64_t>(b), 0).size());
  }
  const Moments m = sample_moments(counts);
  const double cells = static_cast<double>(scale_length(o.k)) * static_cast<double>(scale_length(o.k));
  const double p = 1.0 / cells;
  const double expected_var = cells * p * (1.0 - p);

  Output out;
  out.bytes = "quantity,k,n,value,expected,tolerance,passed\n";
  const double mean_tol = 4.0 * std::sqrt(expected_var / static_cast<double>(o.n));
  const bool mean_ok = std::abs(m.mean - 1.0) <= mean_tol;
  out.bytes += (CsvRow{} << "block_mean" << o.k << o.n << m.mean << 1.0 << mean_tol << mean_ok).str();
  const bool var_ok = std::abs(m.variance - expected_var) <= 0.05 * expected_var;
  out.bytes += (CsvRow{} << "block_variance" << o.k << o.n << m.variance << expected_var << 0.05 * expected_var << var_ok)
                   .str();
  out.ok = mean_ok && var_ok;
  if (!o.shift.empty()) {
    if (o.shift.size() != 2) throw UsageError("--shift needs vx,vy");
    const StationarityReport rep = stationarity_check(o.shift[0], o.shift[1], o.stat_n, c.resolved_seed, c.kmax,
                                                      Point{0.3, 0.7}, c.thread_count());
    out.bytes += (CsvRow{} << "ks_distance" << c.kmax << o.stat_n << rep.ks << 0.0 << rep.threshold << rep.passed).str();
    out.ok = out.ok && rep.passed;
  }
  return out;
}

struct SolveCmdOptions {
  EnvOptions env;
  double T = 16.0;
  double h = 0.1;
  double pad = 4.0;
  std::vector<double> probe{0.0, 0.0};
  std::vector<double> probe_times;
};

Output run_solve(const Common& c, const SolveCmdOptions& o) {
  const Environment env = make_environment(c, o.env, false);
  const GridSpec grid = GridSpec::isolated(o.h, o.T, o.pad);
  grid.validate();
  SolveOptions so;
  so.threads = c.thread_count();
  so.probe = parse_point(o.probe, "--probe");
  so.probe_times = o.probe_times.empty() ? std::vector<double>{o.T} : o.probe_times;
  const SolveResult res = solve(env, grid, so);
  Output out;
  out.truncation = truncation_bound(env, Rect{-grid.R, grid.R, -grid.R, grid.R}, 0.0);
  if (c.format == "pgm") {
    const int n = res.field.n;
    Raster raster{Rect{-grid.R, grid.R, -grid.R, grid.R}, static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    const double T = std::max(o.T, 1e-300);
    for (int j = n - 1; j >= 0; --j) {
      for (int i = 0; i < n; ++i) values.push_back(res.field.at(i, j) / T);
    }
    out.bytes = graymap(raster, values, 1.0, 2.0, "value u/T-1");
    return out;
  }
  out.bytes = "t,u00,umin,umax\n";
  for (const ProbeRow& r : res.probes) out.bytes += (CsvRow{} << r.t << r.u00 << r.umin << r.umax).str();
  return out;
}

struct CertifyOptions {
  std::string color = "green";
  int k = 2;
  long X1 = 0;
  long X2 = 0;
  double s = 3.0;
  std::size_t samples = 10000;
  double h = 0.1;
  double tol_frac = 0.15;
  double residual_tol = 1e-9;
  bool sandwich = true;
};

Output run_certify(const Common& c, const CertifyOptions& o) {
  require_csv(c, "certify");
  Certificate cert{parse_color(o.color), o.X1, o.X2, o.k, o.s};
  const Environment env = Environment::planted({cert.segment()});
  ResidualOptions ro;
  ro.samples = o.samples;
  ro.kink_samples = std::max<std::size_t>(o.samples / 5, 1);
  ro.seed = c.resolved_seed;
  const ResidualReport res = residual_check(cert, env, ro);
  const EndpointCheck end = endpoint_check(cert);
  const double T = cert.horizon();

  Output out;
  out.ok = res.passed(o.residual_tol) && end.ok;
  double u00 = std::nan("");
  double sandwich_worst = std::nan("");
  if (o.sandwich) {
    const GridSpec grid = GridSpec::isolated(o.h, T, 4.0);
    SolveOptions so;
    so.threads = c.thread_count();
    const SolveResult sol = solve(env, grid, so);
    u00 = probe_origin(sol.field) / T;
    const SandwichReport sw = sandwich_check(sol.field, cert, o.tol_frac * T);
    sandwich_worst = sw.worst;
    out.ok = out.ok && sw.ok;
  }
  out.bytes = "k,T_k,color,X1,X2,h,u00_over_T,certificate_value,residual_worst,endpoint_error,sandwich_worst,passed\n";
  const double cert_value = (cert.color == Color::green ? u_plus(Point{}, T, cert) : u_minus(Point{}, T, cert)) / T;
  CsvRow row;
  row << o.k << T << to_string(cert.color) << o.X1 << o.X2 << o.h;
  if (o.sandwich) row << u00; else row << "";
  row << cert_value << res.overall() << std::abs(end.value - end.expected);
  if (o.sandwich) row << sandwich_worst; else row << "";
  row << out.ok;
  out.bytes += row.str();
  if (!end.ok) out.summary = "endpoint identity fails for s = " + format_number(o.s);
  return out;
}

struct TableOptions {
  std::vector<int> ks{1, 2};
  double eps = 0.05;
  double h = 0.1;
  double tol = 0.1;
  std::size_t samples = 2000;
  long red_X1 = 0;
  long green_X2 = 0;
};

Output run_table(const Common& c, const TableOptions& o) {
  require_csv(c, "table");
  NonhomogOptions no;
  no.eps = o.eps;
  no.grid.h = o.h;
  no.tol = o.tol;
  no.residual_samples = o.samples;
  no.red_X1 = o.red_X1;
  no.green_X2 = o.green_X2;
  no.threads = c.thread_count();
  Output out;
  out.bytes = "k,T_k,color,X1,X2,h,u00_over_T,certificate_value,residual_worst\n";
  for (const NonhomogRow& r : nonhomog_table(o.ks, no)) {
    out.bytes += (CsvRow{} << r.k << r.T << to_string(r.color) << r.X1 << r.X2 << r.h << r.u00_over_T
                           << r.certificate_value << r.residual_worst)
                     .str();
    out.ok = out.ok && r.within_bound;
  }
  return out;
}

struct ProbeOptions {
  std::string event = "ck";
  int k = 3;
  double eps = 0.05;
  std::size_t n = 200000;
  long x1 = 4;
};

Output run_probe(const Common& c, const ProbeOptions& o) {
  require_csv(c, "probe");
  if (o.k < 1 || o.k > c.kmax) throw UsageError("--k must lie in [1, kmax]");
  std::function<bool(const Environment&)> detector;
  std::optional<double> exact, bound;
  const std::string& ev = o.event;
  if (ev == "ck" || ev == "ck-red") {
    const bool primed = ev == "ck-red";
    detector = [&, primed](const Environment& env) { return detect_Ck(env, o.k, o.eps, primed); };
    const CkValues v = exact_Ck(o.k, o.eps);
    exact = v.exact;
    bound = v.printed;
  } else if (ev == "bk" || ev == "bk-red") {
    const bool primed = ev == "bk-red";
    detector = [&, primed](const Environment& env) { return detect_Bk(env, o.k, o.eps, primed); };
    const CkValues v = exact_Ck(o.k, o.eps);
    const DkBound d = bound_Dk(o.k, c.kmax, primed);
    bound = v.printed * std::exp(d.log_truncated);
  } else if (ev == "e" || ev == "f") {
    if (o.k < 2) throw UsageError("events e and f need k >= 2");
    if (o.x1 < 1) throw UsageError("--x1 must be >= 1");
    const bool is_e = ev == "e";
    detector = [&, is_e](const Environment& env) {
      return is_e ? event_E(env, o.k, o.x1) : event_F(env, o.k, o.x1);
    };
  } else {
    throw UsageError("unknown event '" + ev + "' (ck, ck-red, bk, bk-red, e, f)");
  }
  const Estimate e = mc_estimate([&](const Seed128& s) { return detector(Environment::random(s, c.kmax)); }, o.n,
                                 c.resolved_seed, c.thread_count());
  Output out;
  out.bytes = "event,k,eps,n,hits,p_hat,ci_lo,ci_hi,analytic_exact,analytic_bound\n";
  CsvRow row;
  row << ev << o.k << o.eps << e.n << e.hits << e.p_hat << e.ci_lo << e.ci_hi;
  if (exact) row << *exact; else row << "";
  if (bound) row << *bound; else row << "";
  out.bytes += row.str();
  return out;
}

struct CorrelateOptions {
  int k = 2;
  long x1 = 0;
  std::size_t n = 20000;
  std::size_t calib_n = 0;
  double min_rho = 0.0;
};

Output run_correlate(const Common& c, const CorrelateOptions& o) {
  require_csv(c, "correlate");
  if (o.k < 2) throw UsageError("--k must be >= 2");
  WitnessOptions wo;
  wo.k_max = c.kmax;
  wo.threads = c.thread_count();
  Output out;
  std::int64_t x1 = o.x1;
  if (x1 <= 0) {
    const Calibration cal = calibrate_x1(o.k, o.calib_n ? o.calib_n : o.n, derive_seed(c.resolved_seed, 1), wo);
    if (!cal.x1) {
      out.ok = false;
      out.summary = "no x1 puts P(E) in [1/2, 2/3]";
      out.bytes = "k,x1,n,pEF,pE_pF,rho_hat,ci_lo,ci_hi\n";
      return out;
    }
    x1 = *cal.x1;
  }
  const CorrelationEstimate ce = rho2_estimate(o.k, x1, o.n, derive_seed(c.resolved_seed, 2), wo);
  out.bytes = "k,x1,n,pEF,pE_pF,rho_hat,ci_lo,ci_hi\n";
  out.bytes += (CsvRow{} << ce.k << ce.x1 << ce.n << ce.pEF << ce.pE_pF << ce.rho_hat << ce.ci_lo << ce.ci_hi).str();
  out.ok = ce.ci_lo > 0.0 && ce.rho_hat >= o.min_rho && ce.e_without_f == 0;
  out.summary = "P(E)=" + format_number(ce.pE) + " P(F)=" + format_number(ce.pF) +
                " samples with E but not F=" + std::to_string(ce.e_without_f);
  return out;
}

struct MixingOptions {
  std::vector<double> r{40.0, 160.0, 640.0};
  double d = 10.0;
  std::size_t n = 50000;
  double ratio = 0.5;
};

Output run_mixing(const Common& c, const MixingOptions& o) {
  require_csv(c, "mixing");
  const auto rows = mixing_decay(o.r, o.d, o.n, c.resolved_seed, c.kmax, c.thread_count());
  Output out;
  out.bytes = "r,d,n,q_hat,r_times_q\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const MixingRow& r = rows[i];
    out.bytes += (CsvRow{} << r.r << r.d << r.n << r.q.p_hat << r.r_times_q()).str();
    if (i > 0 && !(r.q.p_hat <= o.ratio * rows[i - 1].q.p_hat)) out.ok = false;
  }
  if (!out.ok) out.summary = "q(r) does not shrink by the required ratio";
  return out;
}

struct ScalingOptions {
  EnvOptions env;
  double eps = 0.25;
  double t = 1.0;
  double h = 0.1;
  double tol = 1e-10;
};

Output run_scaling(const Common& c, const ScalingOptions& o) {
  require_csv(c, "scaling-check");
  EnvOptions eo = o.env;
  if (eo.planted.empty() && eo.env_file.empty() && eo.background == "none") eo.planted = "red,2,0,0";
  const Environment env = make_environment(c, eo, false);
  const GridSpec grid = GridSpec::isolated(o.h, o.t / o.eps, 4.0);
  const ScalingResult r = scaling_check(env, o.eps, o.t, grid, c.thread_count());
  Output out;
  const double diff = std::abs(r.direct - r.rescaled);
  out.bytes = "eps,t,direct,rescaled,abs_diff\n";
  out.bytes += (CsvRow{} << o.eps << o.t << r.direct << r.rescaled << diff).str();
  out.ok = diff <= o.tol;
  out.summary = "|A-B| = " + format_number(diff);
  return out;
}

struct OracleOptions {
  std::string what = "raster";
  EnvOptions env;
  std::vector<double> window{-30.0, 30.0, -30.0, 30.0};
  double delta = 0.05;
  std::size_t n = 10000;
  int grid = 2001;
};

Output run_oracle(const Common& c, const OracleOptions& o) {
  require_csv(c, "oracle");
  Output out;
  out.bytes = "check,n,worst,bound,passed\n";
  std::mt19937_64 rng(prf_u64(c.resolved_seed, {tags::kSample}));
  if (o.what == "raster") {
    const Environment env = make_environment(c, o.env, true);
    const Rect w = parse_window(o.window);
    const PhaseOracle oracle(env, w, o.delta);
    std::uniform_real_distribution<double> ux(w.x0, w.x1), uy(w.y0, w.y1);
    double worst = 0.0;
    for (std::size_t i = 0; i < o.n; ++i) {
      const Point p{ux(rng), uy(rng)};
      worst = std::max(worst, std::abs(env.eval_c(p) - oracle(p)));
    }
    out.ok = worst <= 2.0 * o.delta;
    out.truncation = truncation_bound(env, w, 0.0);
    out.bytes += (CsvRow{} << "raster" << o.n << worst << 2.0 * o.delta << out.ok).str();
  } else if (o.what == "hamiltonian") {
    std::uniform_real_distribution<double> up(-15.0, 15.0);
    double worst_ratio = 0.0;
    const double cs[] = {1.0, 1.5, 2.0};
    for (std::size_t i = 0; i < o.n; ++i) {
      const Momentum p{up(rng), up(rng)};
      const double cval = cs[i % 3];
      const double bound = (10.0 + 2.0 * (std::abs(p.p1) + std::abs(p.p2))) * (2.0 / o.grid);
      const double diff = std::abs(hamiltonian(p, cval) - hamiltonian_oracle(p, cval, o.grid));
      worst_ratio = std::max(worst_ratio, diff / bound);
    }
    out.ok = worst_ratio <= 1.0;
    out.bytes += (CsvRow{} << "hamiltonian" << o.n << worst_ratio << 1.0 << out.ok).str();
  } else {
    throw UsageError("oracle check must be raster or hamiltonian");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Driver

using Runner = std::function<Output(const Common&)>;

struct Command {
  CLI::App* app = nullptr;
  std::string name;
  Runner run;
};

ordered_json collect_parameters(const CLI::App* sub, ordered_json& runtime) {
  ordered_json params = ordered_json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    std::string key = opt->get_single_name();
    if (key.empty() || key == "help") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
    } else {
      value = opt->get_default_str();
    }
    if (key == "out" || key == "manifest" || key == "threads" || key == "format") {
      if (key == "format") params[key] = value;
      else runtime[key] = value;
      continue;
    }
    params[key] = value;
  }
  return params;
}

int execute(int argc, const char* const* argv);

int replay(const std::string& path, const std::string& out, const std::string& manifest, int threads) {
  const ordered_json m = ordered_json::parse(read_file(path));
  std::vector<std::string> args{"hjlab_cli"};
  std::istringstream words(m.at("command").get<std::string>());
  for (std::string w; words >> w;) args.push_back(w);
  for (const auto& [key, value] : m.at("parameters").items()) {
    const std::string v = value.get<std::string>();
    if (v.empty()) continue;
    if (key == "event" || key == "check") {
      args.push_back(v);
      continue;
    }
    args.push_back("--" + key);
    args.push_back(v);
  }
  args.push_back("--threads");
  args.push_back(std::to_string(threads));
  if (!out.empty()) {
    args.push_back("--out");
    args.push_back(out);
  }
  if (!manifest.empty()) {
    args.push_back("--manifest");
    args.push_back(manifest);
  }
  std::vector<const char*> raw;
  for (const auto& a : args) raw.push_back(a.c_str());
  return execute(static_cast<int>(raw.size()), raw.data());
}

void usage_message(const std::string& what) {
  ordered_json j;
  j["error"] = "usage";
  j["message"] = what;
  std::cerr << j.dump() << "\n";
}

int execute(int argc, const char* const* argv) {
  CLI::App app{"Nonconvex Hamilton-Jacobi segment-field laboratory"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file supplying flags (command-line flags win)");

  Common common;
  std::vector<Command> commands;
  auto add = [&](CLI::App* sub, std::string name, Runner run) {
    add_common(sub, common);
    commands.push_back(Command{sub, std::move(name), std::move(run)});
  };

  CLI::App* env_cmd = app.add_subcommand("env", "Inspect the random environment");
  env_cmd->require_subcommand(1);

  RenderOptions render_opt;
  {
    CLI::App* sub = env_cmd->add_subcommand("render", "Render c over a window (pgm or csv)");
    add_env(sub, render_opt.env);
    sub->add_option("--window", render_opt.window, "x0,x1,y0,y1")->delimiter(',')->capture_default_str();
    sub->add_option("--res", render_opt.res, "Pixels nx,ny")->delimiter(',')->capture_default_str();
    add(sub, "env render", [&](const Common& c) { return run_render(c, render_opt); });
  }
  StatsOptions stats_opt;
  {
    CLI::App* sub = env_cmd->add_subcommand("stats", "Block-count law and stationarity statistics");
    sub->add_option("--k", stats_opt.k, "Scale")->capture_default_str();
    sub->add_option("--n", stats_opt.n, "Blocks")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--shift", stats_opt.shift, "Stationarity shift vx,vy")->delimiter(',');
    sub->add_option("--stat-n", stats_opt.stat_n, "Environments per stationarity sample")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    add(sub, "env stats", [&](const Common& c) { return run_stats(c, stats_opt); });
  }
  SolveCmdOptions solve_opt;
  {
    CLI::App* sub = app.add_subcommand("solve", "Solve the initial-value problem and probe u");
    add_env(sub, solve_opt.env);
    sub->add_option("--T", solve_opt.T, "Horizon")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--h", solve_opt.h, "Spatial step")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--pad", solve_opt.pad, "Extra half-width beyond 2T")->capture_default_str();
    sub->add_option("--probe", solve_opt.probe, "Probe point x,y")->delimiter(',')->capture_default_str();
    sub->add_option("--probe-times", solve_opt.probe_times, "Probe times (default: T)")->delimiter(',');
    add(sub, "solve", [&](const Common& c) { return run_solve(c, solve_opt); });
  }
  CertifyOptions cert_opt;
  {
    CLI::App* sub = app.add_subcommand("certify", "Check a barrier certificate on its planted environment");
    sub->add_option("--color", cert_opt.color, "green (u+) or red (u-)")
        ->capture_default_str()
        ->check(CLI::IsMember({"green", "red"}));
    sub->add_option("--k", cert_opt.k, "Scale of the planted segment")->capture_default_str()->check(CLI::Range(1, kMaxScale));
    sub->add_option("--X1", cert_opt.X1, "Center abscissa")->capture_default_str();
    sub->add_option("--X2", cert_opt.X2, "Center ordinate")->capture_default_str();
    sub->add_option("--s", cert_opt.s, "Time coefficient of u-")->capture_default_str();
    sub->add_option("--samples", cert_opt.samples, "Residual samples")->capture_default_str();
    sub->add_option("--h", cert_opt.h, "Spatial step of the sandwich solve")->capture_default_str();
    sub->add_option("--tol", cert_opt.tol_frac, "Sandwich tolerance as a fraction of T")->capture_default_str();
    sub->add_option("--residual-tol", cert_opt.residual_tol, "Residual tolerance")->capture_default_str();
    sub->add_option("--sandwich", cert_opt.sandwich, "Also solve and check the sandwich")->capture_default_str();
    add(sub, "certify", [&](const Common& c) { return run_certify(c, cert_opt); });
  }
  TableOptions table_opt;
  {
    CLI::App* sub = app.add_subcommand("table", "Green/red conditioned values u(0,T_k)/T_k");
    sub->add_option("--ks", table_opt.ks, "Scales")->delimiter(',')->capture_default_str();
    sub->add_option("--eps", table_opt.eps, "Epsilon")->capture_default_str();
    sub->add_option("--h", table_opt.h, "Finest spatial step")->capture_default_str();
    sub->add_option("--tol", table_opt.tol, "Straddle tolerance")->capture_default_str();
    sub->add_option("--samples", table_opt.samples, "Residual samples per row")->capture_default_str();
    sub->add_option("--red-X1", table_opt.red_X1, "Red center abscissa")->capture_default_str();
    sub->add_option("--green-X2", table_opt.green_X2, "Green center ordinate")->capture_default_str();
    add(sub, "table", [&](const Common& c) { return run_table(c, table_opt); });
  }
  ProbeOptions probe_opt;
  {
    CLI::App* sub = app.add_subcommand("probe", "Monte Carlo event frequency with a Wilson interval");
    sub->add_option("event", probe_opt.event, "ck, ck-red, bk, bk-red, e or f")->capture_default_str();
    sub->add_option("--k", probe_opt.k, "Scale")->capture_default_str();
    sub->add_option("--eps", probe_opt.eps, "Epsilon")->capture_default_str();
    sub->add_option("--n", probe_opt.n, "Samples")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--x1", probe_opt.x1, "x1 for events e and f")->capture_default_str();
    add(sub, "probe", [&](const Common& c) { return run_probe(c, probe_opt); });
  }
  CorrelateOptions corr_opt;
  {
    CLI::App* sub = app.add_subcommand("correlate", "Correlation of the E and F witness events");
    sub->add_option("--k", corr_opt.k, "Scale (r = 3 T_k)")->capture_default_str();
    sub->add_option("--x1", corr_opt.x1, "x1 (0: calibrate)")->capture_default_str();
    sub->add_option("--n", corr_opt.n, "Samples")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--calib-n", corr_opt.calib_n, "Calibration samples (0: same as --n)")->capture_default_str();
    sub->add_option("--min-rho", corr_opt.min_rho, "Required lower value of rho")->capture_default_str();
    add(sub, "correlate", [&](const Common& c) { return run_correlate(c, corr_opt); });
  }
  MixingOptions mix_opt;
  {
    CLI::App* sub = app.add_subcommand("mixing", "Probability that a long segment crosses U or V");
    sub->add_option("--r", mix_opt.r, "Distances")->delimiter(',')->capture_default_str();
    sub->add_option("--d", mix_opt.d, "Side of U and V")->capture_default_str();
    sub->add_option("--n", mix_opt.n, "Samples per distance")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--ratio", mix_opt.ratio, "Required ratio between successive rows")->capture_default_str();
    add(sub, "mixing", [&](const Common& c) { return run_mixing(c, mix_opt); });
  }
  ScalingOptions scale_opt;
  {
    CLI::App* sub = app.add_subcommand("scaling-check", "Compare u^eps(0,t) with eps u(0,t/eps)");
    add_env(sub, scale_opt.env);
    sub->add_option("--eps", scale_opt.eps, "Epsilon")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--t", scale_opt.t, "Time")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--h", scale_opt.h, "Unit-grid spatial step")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--tol", scale_opt.tol, "Allowed |A-B|")->capture_default_str();
    add(sub, "scaling-check", [&](const Common& c) { return run_scaling(c, scale_opt); });
  }
  OracleOptions oracle_opt;
  {
    CLI::App* sub = app.add_subcommand("oracle", "Compare production code against brute-force oracles");
    sub->add_option("check", oracle_opt.what, "raster or hamiltonian")->capture_default_str();
    add_env(sub, oracle_opt.env);
    sub->add_option("--window", oracle_opt.window, "x0,x1,y0,y1")->delimiter(',')->capture_default_str();
    sub->add_option("--delta", oracle_opt.delta, "Oracle sampling step")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--n", oracle_opt.n, "Comparison points or momenta")->capture_default_str();
    sub->add_option("--grid", oracle_opt.grid, "Control grid size")->capture_default_str()->check(CLI::Range(2, 1000000));
    add(sub, "oracle", [&](const Common& c) { return run_oracle(c, oracle_opt); });
  }
  std::string replay_path, replay_out, replay_manifest;
  int replay_threads = 1;
  CLI::App* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a run manifest");
  replay_cmd->add_option("manifest_file", replay_path, "Run manifest")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--out", replay_out, "Output file");
  replay_cmd->add_option("--manifest", replay_manifest, "Run manifest path");
  replay_cmd->add_option("--threads", replay_threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    usage_message(e.what());
    return kExitUsage;
  }

  if (replay_cmd->parsed()) return replay(replay_path, replay_out, replay_manifest, replay_threads);

  const Command* chosen = nullptr;
  for (const Command& c : commands) {
    if (c.app->parsed()) chosen = &c;
  }
  if (!chosen) {
    usage_message("no command selected");
    return kExitUsage;
  }

  try {
    common.resolved_seed = common.seed.empty() ? Seed128::from_entropy() : Seed128::from_hex(common.seed);
    if (common.seed.empty()) common.seed = common.resolved_seed.to_hex();

    RunManifest manifest;
    manifest.command = chosen->name;
    manifest.parameters = collect_parameters(chosen->app, manifest.runtime);
    manifest.parameters["seed"] = common.seed;
    manifest.seed = common.resolved_seed;
    manifest.k_max = common.kmax;
    manifest.started = utc_timestamp(std::chrono::system_clock::now());

    const Output out = chosen->run(common);
    manifest.finished = utc_timestamp(std::chrono::system_clock::now());
    manifest.truncation_bound = out.truncation;

    if (common.out.empty()) {
      std::cout << out.bytes << std::flush;
      manifest.outputs.emplace_back("-", content_hash(out.bytes));
    } else {
      write_file(common.out, out.bytes);
      manifest.outputs.emplace_back(common.out, content_hash(out.bytes));
    }
    const std::string manifest_path =
        !common.manifest.empty() ? common.manifest : (common.out.empty() ? std::string{} : common.out + ".manifest.json");
    if (manifest_path.empty()) {
      std::cerr << manifest.dump();
    } else {
      write_file(manifest_path, manifest.dump());
    }
    if (!out.summary.empty()) std::cerr << out.summary << "\n";
    if (!out.ok) {
      std::cerr << "check failed: " << chosen->name << "\n";
      return kExitFailed;
    }
    return kExitOk;
  } catch (const UsageError& e) {
    usage_message(e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    usage_message(e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    ordered_json j;
    j["error"] = "runtime";
    j["message"] = e.what();
    std::cerr << j.dump() << "\n";
    return kExitFailed;
  }
}

}  // namespace

int main(int argc, char** argv) { return execute(argc, argv); }
