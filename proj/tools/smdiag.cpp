// Command-line front end: path/walk/local-time/flow/variation utilities plus
// the scenario runner. Exit codes: 0 success, 2 scenario check failure,
// 64 usage error, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "smdiag/scenario.hpp"

namespace {

using namespace smdiag;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stod(item));
  if (out.empty()) throw UsageError("empty list: '" + s + "'");
  return out;
}

/// "a:b:n" -> n+1 evenly spaced points from a to b.
std::vector<double> parse_grid(const std::string& s) {
  double a = 0.0, b = 0.0;
  long long n = 0;
  if (std::sscanf(s.c_str(), "%lf:%lf:%lld", &a, &b, &n) != 3 || n < 1 || !(b > a))
    throw UsageError("bad grid spec '" + s + "' (want a:b:n with b>a, n>=1)");
  std::vector<double> g(static_cast<std::size_t>(n) + 1);
  for (std::size_t j = 0; j < g.size(); ++j)
    g[j] = a + (b - a) * static_cast<double>(j) / static_cast<double>(n);
  return g;
}

std::vector<std::size_t> parse_strides(const std::string& s) {
  std::vector<std::size_t> out;
  for (double v : parse_list(s)) {
    if (v < 1.0) throw UsageError("strides must be >= 1");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void write_path_csv(const std::filesystem::path& file, const SamplePath& p) {
  CsvWriter w(file, "k,t,value");
  for (std::size_t k = 0; k < p.values.size(); ++k) w.row(k, p.time(k), p.values[k]);
}

/// Reads the last column of a numeric CSV (header row optional).
std::vector<double> read_values_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file);
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t pos = line.find_last_of(',');
    std::string cell = pos == std::string::npos ? line : line.substr(pos + 1);
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      if (out.empty()) continue;  // header
      throw std::runtime_error("bad numeric cell in " + file + ": '" + cell + "'");
    }
  }
  if (out.empty()) throw std::runtime_error("no numeric rows in " + file);
  return out;
}

/// Two-column x,value CSV into a uniformly sampled table.
SampledFunction read_table_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file);
  std::vector<double> xs, vs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double x = 0.0, v = 0.0;
    if (std::sscanf(line.c_str(), "%lf,%lf", &x, &v) != 2) {
      if (xs.empty()) continue;  // header
      throw std::runtime_error("bad row in " + file + ": '" + line + "'");
    }
    xs.push_back(x);
    vs.push_back(v);
  }
  if (xs.size() < 2) throw std::runtime_error("need at least two samples in " + file);
  SampledFunction f;
  f.x0 = xs.front();
  f.dx = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
  for (std::size_t j = 0; j < xs.size(); ++j)
    if (std::abs(xs[j] - (f.x0 + f.dx * static_cast<double>(j))) > 1e-9 * (1.0 + std::abs(xs[j])))
      throw std::runtime_error("x column of " + file + " is not uniformly spaced");
  f.values = std::move(vs);
  return f;
}

PiecewiseLinearSigma load_sigma(const std::string& spec) {
  if (spec == "canonical") return PiecewiseLinearSigma::canonical();
  Config cfg = Config::from_file(spec);
  std::vector<double> breaks = cfg.get_reals("breaks");
  std::vector<double> slopes = cfg.get_reals("slopes");
  double ax = cfg.get_real("anchor_x");
  double av = cfg.get_real("anchor_value");
  cfg.require_all_consumed();
  return PiecewiseLinearSigma(breaks, slopes, ax, av);
}

void write_variation_csv(const std::filesystem::path& file, const VariationReport& rep,
                         const char* verdict_prefix) {
  CsvWriter w(file, "rung,mesh,value");
  for (std::size_t r = 0; r < rep.mesh.size(); ++r)
    w.row(r, rep.mesh[r], rep.value[r]);
  w.line(std::string("verdict,") + verdict_prefix + "," + to_string(rep.trend));
  std::cout << verdict_prefix << " trend: " << to_string(rep.trend) << "\n";
}

// ----------------------------------------------------------------------------

int cmd_walk(long long seed, long long stream, double horizon, long long steps,
             double delta, double origin, double cutoff, const std::string& out) {
  SamplePath p = gen_brownian({static_cast<std::uint64_t>(seed),
                               static_cast<std::uint64_t>(stream)},
                              horizon, static_cast<std::size_t>(steps));
  LatticeWalk w = embed_walk(p, delta, origin);
  if (cutoff <= 0.0) cutoff = horizon;
  std::filesystem::path dir(out);
  std::filesystem::create_directories(dir);
  write_path_csv(dir / "path.csv", p);
  {
    CsvWriter c(dir / "walk.csv", "k,t,value");
    for (std::size_t k = 0; k <= w.steps(); ++k) c.row(k, w.walk_time(k), w.walk_value(k));
  }
  {
    VisitCounts vc = visit_counts(w, cutoff);
    CsvWriter c(dir / "counts.csv", "site_index,site,count");
    for (const auto& [r, n] : vc.counts)
      c.row(r, vc.site_value(r), static_cast<long long>(n));
  }
  std::cout << "walk: " << w.steps() << " steps, " << visit_counts(w, cutoff).total()
            << " counted visits\n";
  return 0;
}

int cmd_dc_test(const std::string& input, const std::string& gen, long long seed,
                long long stream, double horizon, long long steps, double hurst,
                const std::string& deltas_s, double a, double b, const std::string& out) {
  SampledFunction f;
  if (!input.empty()) {
    f = read_table_csv(input);
  } else if (gen == "x2") {
    f.x0 = -0.48;
    f.dx = 0.0025;
    f.values.resize(801);
    for (std::size_t j = 0; j < f.values.size(); ++j) f.values[j] = f.x(j) * f.x(j);
  } else if (gen == "intbm" || gen == "intfbm") {
    SeedSpec sp{static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(stream)};
    SamplePath w = gen == "intbm"
                       ? gen_brownian(sp, horizon, static_cast<std::size_t>(steps))
                       : FbmCholesky(hurst, horizon, static_cast<std::size_t>(steps)).sample(sp);
    CompensatedSum acc;
    f.x0 = 0.0;
    f.dx = w.dt;
    f.values.resize(w.values.size());
    for (std::size_t k = 0; k < w.steps(); ++k) {
      acc.add(0.5 * w.dt * (w.values[k] + w.values[k + 1]));
      f.values[k + 1] = acc.value();
    }
  } else {
    throw UsageError("dc-test: need --input or --gen {x2|intbm|intfbm}");
  }
  std::vector<double> deltas = parse_list(deltas_s);
  DcVerdict v = dc_test(f, deltas, a, b, DcThresholds{});
  std::filesystem::path dir(out);
  CsvWriter w(dir / "dc.csv", "delta,mass");
  for (std::size_t i = 0; i < v.deltas.size(); ++i) w.row(v.deltas[i], v.masses[i]);
  w.line(std::string("verdict,") + to_string(v.verdict));
  std::cout << "verdict: " << to_string(v.verdict) << " exponent: " << v.growth_exponent
            << "\n";
  return 0;
}

int cmd_localtime(long long seed, long long stream, double horizon, long long steps,
                  const std::string& method, const std::string& levels_s, double delta,
                  double bandwidth, const std::string& out) {
  SamplePath p = gen_brownian({static_cast<std::uint64_t>(seed),
                               static_cast<std::uint64_t>(stream)},
                              horizon, static_cast<std::size_t>(steps));
  std::vector<double> levels =
      levels_s.find(':') != std::string::npos ? parse_grid(levels_s) : parse_list(levels_s);
  std::filesystem::path dir(out);
  CsvWriter w(dir / "localtime.csv", "level,value");
  for (double y : levels) {
    double v = 0.0;
    if (method == "tanaka")
      v = tanaka_local_time(p, y, horizon);
    else if (method == "occupation")
      v = occupation_profile(p, horizon, {y}, bandwidth).value[0];
    else if (method == "crossing")
      v = crossing_local_time(p, y, delta, horizon);
    else
      throw UsageError("localtime: unknown method '" + method + "'");
    w.row(y, v);
  }
  std::cout << "localtime: " << levels.size() << " levels via " << method << "\n";
  return 0;
}

int cmd_flow(long long seed, long long stream, double horizon, long long steps,
             const std::string& sigma_spec, const std::string& xgrid_s,
             const std::string& times_s, double alpha, double split_s,
             const std::string& out) {
  PiecewiseLinearSigma sigma = load_sigma(sigma_spec);
  std::vector<double> grid = parse_grid(xgrid_s);
  SamplePath drv = gen_brownian({static_cast<std::uint64_t>(seed),
                                 static_cast<std::uint64_t>(stream)},
                                horizon, static_cast<std::size_t>(steps));
  FlowOptions opt;
  std::vector<double> times =
      times_s.empty() ? std::vector<double>{horizon} : parse_list(times_s);
  opt.record_steps.push_back(0);
  for (double t : times) {
    auto k = static_cast<std::size_t>(std::llround((t - drv.t0) / drv.dt));
    if (k > drv.steps()) throw UsageError("flow: recorded time beyond horizon");
    opt.record_steps.push_back(k);
  }
  FlowField f = simulate_flow(sigma, grid, drv, opt);
  std::filesystem::path dir(out);
  std::filesystem::create_directories(dir);
  for (std::size_t s = 0; s < f.slices(); ++s) {
    CsvWriter w(dir / ("slice_" + std::to_string(s) + ".csv"), "x,D,Dprime,Z,Zqv");
    for (std::size_t j = 0; j < grid.size(); ++j)
      w.row(grid[j], f.D[s][j], f.Dprime[s][j], f.Z[s][j], f.Zqv[s][j]);
  }
  if (std::isfinite(alpha)) {
    QuantilePath q = invert_flow(f, alpha);
    CsvWriter w(dir / "quantile.csv", "t,q,inv_derivative");
    for (std::size_t s = 0; s < q.times.size(); ++s)
      w.row(q.times[s], q.q[s], q.inv_derivative[s]);
  }
  if (std::isfinite(split_s)) {
    double disc = compose_flow_check(sigma, grid, drv, split_s);
    std::cout << "compose discrepancy: " << csv_cell(disc) << "\n";
  }
  std::cout << "flow: " << f.slices() << " slices over " << grid.size() << " columns\n";
  return 0;
}

int cmd_variation(const std::string& mode, const std::string& input, long long seed,
                  long long stream, double horizon, long long steps, double p,
                  const std::string& strides_s, double spacing, double a, double b,
                  const std::string& xgrid_s, long long queries, double delta_factor,
                  const std::string& out) {
  std::filesystem::path dir(out);
  PartitionLadder ladder = make_ladder(parse_strides(strides_s));
  if (mode == "qv" || mode == "pvar" || mode == "tv") {
    std::vector<double> v;
    if (!input.empty()) {
      v = read_values_csv(input);
    } else {
      SamplePath path = gen_brownian({static_cast<std::uint64_t>(seed),
                                      static_cast<std::uint64_t>(stream)},
                                     horizon, static_cast<std::size_t>(steps));
      v = path.values;
      if (spacing <= 0.0) spacing = path.dt;
    }
    if (spacing <= 0.0) spacing = 1.0;
    if (mode == "tv") {
      std::cout << "total variation: " << csv_cell(total_variation(v)) << "\n";
      return 0;
    }
    double pp = mode == "qv" ? 2.0 : p;
    VariationReport rep = variation_report(v, spacing, pp, ladder);
    write_variation_csv(dir / (mode + ".csv"), rep, mode.c_str());
    return 0;
  }
  if (mode == "space-qv") {
    PiecewiseLinearSigma sigma = PiecewiseLinearSigma::canonical();
    std::vector<double> grid = parse_grid(xgrid_s);
    SamplePath drv = gen_brownian({static_cast<std::uint64_t>(seed),
                                   static_cast<std::uint64_t>(stream)},
                                  horizon, static_cast<std::size_t>(steps));
    FlowOptions opt;
    opt.record_steps = {0, drv.steps()};
    FlowField f = simulate_flow(sigma, grid, drv, opt);
    SpaceQv z = space_qv_Z(f, a, b);
    auto rungs = space_qv_Dprime(f, a, b, ladder);
    CsvWriter w(dir / "spaceqv.csv", "rung,mesh,value,formula");
    for (std::size_t r = 0; r < rungs.size(); ++r)
      w.row(r, rungs[r].mesh, rungs[r].empirical, rungs[r].formula);
    w.line(std::string("z,") + csv_cell(z.empirical) + "," + csv_cell(z.formula));
    std::cout << "space-qv z: " << csv_cell(z.empirical) << " vs " << csv_cell(z.formula)
              << "\n";
    return 0;
  }
  if (mode == "rogers") {
    SamplePath path = gen_brownian({static_cast<std::uint64_t>(seed),
                                    static_cast<std::uint64_t>(stream)},
                                   horizon, static_cast<std::size_t>(steps));
    double delta = delta_factor * std::sqrt(path.dt);
    auto pts = rogers_points(path, static_cast<std::size_t>(queries), delta);
    std::vector<double> x(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) x[k] = pts[k].x;
    VariationReport rep =
        variation_report(x, horizon / static_cast<double>(queries), p, ladder);
    write_variation_csv(dir / "rogers.csv", rep, "rogers");
    return 0;
  }
  throw UsageError("variation: unknown mode '" + mode + "'");
}

int cmd_run(const std::string& config_file, long long seed_override, bool seed_given,
            const std::string& out, unsigned threads) {
  Config cfg = Config::from_file(config_file);
  if (seed_given) cfg.set("master_seed", std::to_string(seed_override));
  RunContext ctx;
  ctx.out_dir = out;
  ctx.threads = threads;
  ScenarioResult res = run_scenario(cfg, ctx);
  write_summary(res, ctx);
  std::cout << render_summary(res);
  return res.all_pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic path and flow diagnostics"};
  app.require_subcommand(1);

  long long seed = 1, stream = 0, steps = 100000;
  double horizon = 1.0;
  std::string out = ".";
  auto add_common = [&](CLI::App* c, bool with_path = true) {
    c->add_option("--out", out, "output directory");
    if (with_path) {
      c->add_option("--seed", seed, "master seed");
      c->add_option("--stream", stream, "stream index");
      c->add_option("--horizon", horizon, "time horizon");
      c->add_option("--steps", steps, "number of time steps");
    }
  };

  auto* walk = app.add_subcommand("walk", "embed the first-exit walk of a Brownian path");
  double delta = 0.01, origin = 0.0, cutoff = 0.0;
  add_common(walk);
  walk->add_option("--delta", delta, "lattice spacing");
  walk->add_option("--origin", origin, "lattice origin");
  walk->add_option("--cutoff", cutoff, "visit-count time cutoff (default horizon)");

  auto* dct = app.add_subcommand("dc-test", "second-difference mass growth of a table");
  std::string input, gen, deltas_s = "0.04,0.02,0.01";
  double hurst = 0.5, dca = 0.125, dcb = 1.125;
  add_common(dct);
  dct->add_option("--input", input, "CSV of x,value rows");
  dct->add_option("--gen", gen, "generator: x2 | intbm | intfbm");
  dct->add_option("--hurst", hurst, "Hurst index for intfbm");
  dct->add_option("--deltas", deltas_s, "comma list, strictly decreasing");
  dct->add_option("--a", dca, "interval left end");
  dct->add_option("--b", dcb, "interval right end");

  auto* lt = app.add_subcommand("localtime", "local-time estimators on a Brownian path");
  std::string method = "tanaka", levels_s = "0";
  double lt_delta = 0.02, bandwidth = 0.02;
  add_common(lt);
  lt->add_option("--method", method, "tanaka | occupation | crossing");
  lt->add_option("--levels", levels_s, "comma list or a:b:n grid");
  lt->add_option("--delta", lt_delta, "crossing exit distance");
  lt->add_option("--bandwidth", bandwidth, "occupation window width");

  auto* fl = app.add_subcommand("flow", "coupled SDE flow over an initial-condition grid");
  std::string sigma_spec = "canonical", xgrid_s = "-0.1:1.1:240", times_s;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double split_s = std::numeric_limits<double>::quiet_NaN();
  add_common(fl);
  fl->add_option("--sigma", sigma_spec, "canonical | config file with breaks/slopes/anchor");
  fl->add_option("--xgrid", xgrid_s, "a:b:n initial-condition grid");
  fl->add_option("--times", times_s, "comma list of slice times (default: horizon)");
  fl->add_option("--alpha", alpha, "quantile level to invert");
  fl->add_option("--split-s", split_s, "restart time for the composition check");

  auto* var = app.add_subcommand("variation", "variation ladders and derived processes");
  std::string mode, strides_s = "64,32,16,8,4,2,1", var_xgrid = "0.25:0.75:1000";
  double p = 2.0, spacing = 0.0, va = 0.3, vb = 0.7, delta_factor = 10.0;
  long long queries = 1024;
  add_common(var);
  var->add_option("mode", mode, "qv | pvar | tv | space-qv | rogers")->required();
  var->add_option("--input", input, "CSV whose last column is the sampled process");
  var->add_option("--p", p, "variation order");
  var->add_option("--strides", strides_s, "partition ladder, coarse to fine");
  var->add_option("--spacing", spacing, "sample spacing (default: path dt)");
  var->add_option("--a", va, "space-qv interval left end");
  var->add_option("--b", vb, "space-qv interval right end");
  var->add_option("--xgrid", var_xgrid, "space-qv initial-condition grid a:b:n");
  var->add_option("--queries", queries, "rogers query count (must divide steps)");
  var->add_option("--delta-factor", delta_factor, "rogers exit distance in sqrt(dt) units");

  auto* run = app.add_subcommand("run", "execute a configured scenario");
  std::string config_file;
  unsigned threads = 1;
  run->add_option("--config", config_file, "scenario config file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override master_seed");
  run->add_option("--out", out, "output directory")->default_val("out");
  run->add_option("--threads", threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  try {
    if (*walk) return cmd_walk(seed, stream, horizon, steps, delta, origin, cutoff, out);
    if (*dct)
      return cmd_dc_test(input, gen, seed, stream, horizon, steps, hurst, deltas_s, dca,
                         dcb, out);
    if (*lt)
      return cmd_localtime(seed, stream, horizon, steps, method, levels_s, lt_delta,
                           bandwidth, out);
    if (*fl)
      return cmd_flow(seed, stream, horizon, steps, sigma_spec, xgrid_s, times_s, alpha,
                      split_s, out);
    if (*var)
      return cmd_variation(mode, input, seed, stream, horizon, steps, p, strides_s,
                           spacing, va, vb, var_xgrid, queries, delta_factor, out);
    if (*run) return cmd_run(config_file, seed, seed_opt->count() > 0, out, threads);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 64;
  } catch (const UnknownScenarioError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 64;
}
