#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "smdiag/common.hpp"
#include "smdiag/dcdiag.hpp"
#include "smdiag/fbm.hpp"
#include "smdiag/flow.hpp"
#include "smdiag/io.hpp"
#include "smdiag/lattice.hpp"
#include "smdiag/localtime.hpp"
#include "smdiag/rng.hpp"
#include "smdiag/sample_path.hpp"
#include "smdiag/variation.hpp"

namespace smdiag {

inline constexpr const char* kToolkitVersion = "0.1.0";

/// Work-sharing loop whose observable results are independent of the thread
/// count: bodies write only to their own index slot, and all aggregation
/// happens afterwards in index order (with order-independent exact sums).
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  unsigned k = std::min<unsigned>(threads, static_cast<unsigned>(n));
  pool.reserve(k);
  for (unsigned w = 0; w < k; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  std::string tolerance;
};

struct ScenarioResult {
  std::string name;
  std::uint64_t config_hash = 0;
  long long master_seed = 0;
  std::string seed_note;
  std::vector<CheckResult> checks;
  std::vector<std::string> csv_files;  // relative to the output directory

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

struct RunContext {
  std::filesystem::path out_dir = ".";
  unsigned threads = 1;
};

namespace detail {

inline std::string window_text(double lo, double hi) {
  return "[" + csv_cell(lo) + "," + csv_cell(hi) + "]";
}

inline CheckResult check_window(const std::string& name, double value, double lo,
                                double hi) {
  return {name, value >= lo && value <= hi, value, window_text(lo, hi)};
}

inline CheckResult check_at_most(const std::string& name, double value, double bound) {
  return {name, value <= bound, value, "<=" + csv_cell(bound)};
}

inline CheckResult check_at_least(const std::string& name, double value, double bound) {
  return {name, value >= bound, value, ">=" + csv_cell(bound)};
}

inline std::filesystem::path scenario_dir(const RunContext& ctx, const std::string& name) {
  return ctx.out_dir / name;
}

/// Registers a CSV path relative to ctx.out_dir.
inline void note_csv(ScenarioResult& res, const RunContext& ctx,
                     const std::filesystem::path& file) {
  res.csv_files.push_back(std::filesystem::relative(file, ctx.out_dir).generic_string());
}

inline SamplePath subsample(const SamplePath& p, std::size_t every) {
  require(every >= 1 && p.steps() % every == 0, "subsample: stride must divide steps");
  SamplePath out;
  out.t0 = p.t0;
  out.dt = p.dt * static_cast<double>(every);
  out.values.reserve(p.steps() / every + 1);
  for (std::size_t k = 0; k < p.values.size(); k += every) out.values.push_back(p.values[k]);
  return out;
}

/// Cumulative trapezoid integral of a sampled path, as a table over its
/// time grid reinterpreted as a space variable.
inline SampledFunction integrate_path(const SamplePath& p, double x0) {
  SampledFunction f;
  f.x0 = x0;
  f.dx = p.dt;
  f.values.resize(p.values.size());
  CompensatedSum acc;
  f.values[0] = 0.0;
  for (std::size_t k = 0; k < p.steps(); ++k) {
    acc.add(0.5 * p.dt * (p.values[k] + p.values[k + 1]));
    f.values[k + 1] = acc.value();
  }
  return f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// bm-dc: embedded-walk pathwise identities plus the bounded side of the
// second-difference diagnostic on F(x) = x^2.
// ---------------------------------------------------------------------------
inline ScenarioResult scenario_bm_dc(const Config& cfg, const RunContext& ctx) {
  ScenarioResult res;
  res.name = "bm-dc";
  long long seed = cfg.get_int("master_seed");
  double horizon = cfg.get_real("horizon", 1.0);
  long long steps = cfg.get_int("steps", 1000000);
  double delta = cfg.get_real("delta", 0.01);
  double ito_tol = cfg.get_real("tol.ito_residual", 1e-12);
  double mass_tol = cfg.get_real("tol.x2_mass_rel", 0.05);
  std::vector<double> deltas = cfg.get_reals("dc_deltas");
  cfg.require_all_consumed();

  SamplePath path = gen_brownian({static_cast<std::uint64_t>(seed), 0}, horizon,
                                 static_cast<std::size_t>(steps));
  LatticeWalk walk = embed_walk(path, delta, 0.0);

  struct NamedF {
    const char* name;
    std::function<double(double)> f;
  };
  std::vector<NamedF> fs = {{"square", [](double x) { return x * x; }},
                            {"abs", [](double x) { return std::abs(x); }},
                            {"cosine", [](double x) { return std::cos(3.0 * x); }}};
  double worst_residual = 0.0;
  double worst_regroup = 0.0;
  for (const auto& nf : fs) {
    std::size_t n = walk.steps();
    ItoDecomposition d = discrete_ito(nf.f, walk, n);
    double regrouped = discrete_ito_tanaka(nf.f, walk, n);
    worst_residual = std::max(worst_residual, std::abs(d.residual));
    worst_regroup = std::max(worst_regroup, std::abs(d.laplacian_part - regrouped));
  }
  res.checks.push_back(detail::check_at_most("ito-residual", worst_residual, ito_tol));
  res.checks.push_back({"ito-regroup-exact", worst_regroup == 0.0, worst_regroup, "=0"});

  // F(x) = x^2 tabulated on a grid aligned with every requested delta.
  SampledFunction f2;
  f2.x0 = -0.48;
  f2.dx = 0.0025;
  f2.values.resize(801);
  for (std::size_t j = 0; j < f2.values.size(); ++j) {
    double x = f2.x(j);
    f2.values[j] = x * x;
  }
  double worst_mass = 0.0;
  std::vector<std::pair<double, double>> masses;
  for (double d : deltas) {
    AtomicMeasure mu = mu_delta(f2, d, 0.0, 1.0);
    masses.emplace_back(d, mu.total);
    worst_mass = std::max(worst_mass, std::abs(mu.total / 2.0 - 1.0));
  }
  DcVerdict rep = dc_test(f2, deltas, 0.0, 1.0, DcThresholds{});
  res.checks.push_back(detail::check_at_most("x2-mass-rel-err", worst_mass, mass_tol));
  res.checks.push_back({"x2-verdict-bounded", rep.verdict == Boundedness::bounded,
                        rep.verdict == Boundedness::bounded ? 1.0 : 0.0, "bounded"});

  auto dir = detail::scenario_dir(ctx, res.name);
  {
    CsvWriter w(dir / "walk.csv", "k,t,value");
    for (std::size_t k = 0; k <= walk.steps(); ++k)
      w.row(k, walk.walk_time(k), walk.walk_value(k));
    detail::note_csv(res, ctx, w.path());
  }
  {
    VisitCounts vc = visit_counts(walk, horizon);
    CsvWriter w(dir / "counts.csv", "site_index,site,count");
    for (const auto& [r, c] : vc.counts)
      w.row(r, vc.site_value(r), static_cast<long long>(c));
    detail::note_csv(res, ctx, w.path());
  }
  {
    CsvWriter w(dir / "dc_x2.csv", "delta,mass");
    for (auto [d, m] : masses) w.row(d, m);
    w.line(std::string("verdict,") + to_string(rep.verdict));
    detail::note_csv(res, ctx, w.path());
  }
  return res;
}

// ---------------------------------------------------------------------------
// integrated-bm / integrated-fbm: divergence of the second-difference measure
// for integrals of rough paths, with the fitted growth exponent per seed.
// ---------------------------------------------------------------------------
namespace detail {

struct DivergenceOutcome {
  long long seed_stream = 0;
  double exponent = 0.0;
  Boundedness verdict = Boundedness::inconclusive;
  bool pass = false;
};

template <class MakeTable>
std::vector<DivergenceOutcome> divergence_sweep(std::size_t n_seeds, unsigned threads,
                                                MakeTable make_table,
                                                const std::vector<double>& deltas, double a,
                                                double b, double exp_lo, double exp_hi) {
  std::vector<DivergenceOutcome> out(n_seeds);
  parallel_for(n_seeds, threads, [&](std::size_t i) {
    SampledFunction f = make_table(i);
    DcVerdict rep = dc_test(f, deltas, a, b, DcThresholds{});
    DivergenceOutcome& o = out[i];
    o.seed_stream = static_cast<long long>(i);
    o.exponent = rep.growth_exponent;
    o.verdict = rep.verdict;
    o.pass = rep.verdict == Boundedness::diverging && rep.growth_exponent >= exp_lo &&
             rep.growth_exponent <= exp_hi;
  });
  return out;
}

inline void write_divergence_csv(ScenarioResult& res, const RunContext& ctx,
                                 const std::filesystem::path& file,
                                 const std::vector<DivergenceOutcome>& rows) {
  CsvWriter w(file, "seed_stream,exponent,verdict");
  for (const auto& r : rows)
    w.line(std::to_string(r.seed_stream) + "," + csv_cell(r.exponent) + "," +
           to_string(r.verdict));
  note_csv(res, ctx, w.path());
}

}  // namespace detail

inline ScenarioResult scenario_integrated_bm(const Config& cfg, const RunContext& ctx) {
  ScenarioResult res;
  res.name = "integrated-bm";
  long long seed = cfg.get_int("master_seed");
  long long n_seeds = cfg.get_int("seeds", 10);
  double horizon = cfg.get_real("horizon", 1.25);
  long long steps = cfg.get_int("steps", 2560);
  double a = cfg.get_real("a", 0.125);
  double b = cfg.get_real("b", 1.125);
  std::vector<double> deltas = cfg.get_reals("dc_deltas");
  double exp_lo = cfg.get_real("tol.exponent_lo", 0.3);
  double exp_hi = cfg.get_real("tol.exponent_hi", 0.7);
  long long min_pass = cfg.get_int("tol.min_pass", 9);
  cfg.require_all_consumed();
  res.seed_note = "seeds=" + std::to_string(n_seeds);

  auto make_table = [&](std::size_t i) {
    SamplePath w = gen_brownian({static_cast<std::uint64_t>(seed), i}, horizon,
                                static_cast<std::size_t>(steps));
    return detail::integrate_path(w, 0.0);
  };
  auto rows = detail::divergence_sweep(static_cast<std::size_t>(n_seeds), ctx.threads,
                                       make_table, deltas, a, b, exp_lo, exp_hi);
  long long n_pass = 0;
  for (const auto& r : rows) n_pass += r.pass ? 1 : 0;
  res.checks.push_back(detail::check_at_least("divergence-seeds",
                                              static_cast<double>(n_pass),
                                              static_cast<double>(min_pass)));
  detail::write_divergence_csv(res, ctx, detail::scenario_dir(ctx, res.name) / "seeds.csv",
                               rows);
  return res;
}

inline ScenarioResult scenario_integrated_fbm(const Config& cfg, const RunContext& ctx) {
  ScenarioResult res;
  res.name = "integrated-fbm";
  long long seed = cfg.get_int("master_seed");
  long long n_seeds = cfg.get_int("seeds", 10);
  double horizon = cfg.get_real("horizon", 1.25);
  long long steps = cfg.get_int("steps", 2560);
  double a = cfg.get_real("a", 0.125);
  double b = cfg.get_real("b", 1.125);
  std::vector<double> hursts = cfg.get_reals("hurst");
  std::vector<double> deltas = cfg.get_reals("dc_deltas");
  double exp_lo = cfg.get_real("tol.exponent_lo", 0.3);
  double exp_hi = cfg.get_real("tol.exponent_hi", 0.7);
  long long min_pass = cfg.get_int("tol.min_pass", 9);
  cfg.require_all_consumed();
  res.seed_note = "seeds=" + std::to_string(n_seeds);

  auto dir = detail::scenario_dir(ctx, res.name);
  for (double h : hursts) {
    FbmCholesky chol(h, horizon, static_cast<std::size_t>(steps));
    auto make_table = [&](std::size_t i) {
      SamplePath w = chol.sample({static_cast<std::uint64_t>(seed), i});
      return detail::integrate_path(w, 0.0);
    };
    // Cholesky factor is shared; sampling itself is cheap, so run serially
    // when threads would contend on the factor (reads only, still safe).
    auto rows = detail::divergence_sweep(static_cast<std::size_t>(n_seeds), ctx.threads,
                                         make_table, deltas, a, b, exp_lo, exp_hi);
    long long n_pass = 0;
    for (const auto& r : rows) n_pass += r.pass ? 1 : 0;
    char tag[32];
    std::snprintf(tag, sizeof tag, "h%02d", static_cast<int>(std::lround(h * 100)));
    res.checks.push_back(detail::check_at_least(std::string(tag) + "-divergence-seeds",
                                                static_cast<double>(n_pass),
                                                static_cast<double>(min_pass)));
    detail::write_divergence_csv(res, ctx, dir / (std::string("seeds_") + tag + ".csv"),
                                 rows);
  }
  return res;
}

// ---------------------------------------------------------------------------
// crossing-lt: the three local-time estimators triangulated at level 0.
// ---------------------------------------------------------------------------
inline ScenarioResult scenario_crossing_lt(const Config& cfg, const RunContext& ctx) {
  ScenarioResult res;
  res.name = "crossing-lt";
  long long seed = cfg.get_int("master_seed");
  long long reps = cfg.get_int("replicates", 10000);
  double horizon = cfg.get_real("horizon", 1.0);
  long long steps = cfg.get_int("steps", 100000);
  double level = cfg.get_real("level", 0.0);
  double delta = cfg.get_real("delta", 0.02);
  double bandwidth = cfg.get_real("bandwidth", 0.02);
  double lo = cfg.get_real("tol.window_lo", 0.758);
  double hi = cfg.get_real("tol.window_hi", 0.838);
  cfg.require_all_consumed();
  res.seed_note = "replicates=" + std::to_string(reps);

  const std::size_t n = static_cast<std::size_t>(reps);
  std::vector<double> tanaka(n), occupation(n), crossing(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    SamplePath p = gen_brownian({static_cast<std::uint64_t>(seed), i}, horizon,
                                static_cast<std::size_t>(steps));
    tanaka[i] = tanaka_local_time(p, level, horizon);
    LocalTimeProfile prof = occupation_profile(p, horizon, {level}, bandwidth);
    occupation[i] = prof.value[0];
    crossing[i] = crossing_local_time(p, level, delta, horizon);
  });

  auto dir = detail::scenario_dir(ctx, res.name);
  CsvWriter w(dir / "estimates.csv", "estimator,mean,sd");
  auto add = [&](const char* name, const std::vector<double>& v) {
    ExactSum s, s2;
    for (double x : v) {
      s.add(x);
      s2.add_product(x, x);
    }
    double mean = s.value() / static_cast<double>(v.size());
    double var =
        (s2.value() - mean * mean * static_cast<double>(v.size())) /
        static_cast<double>(v.size() - 1);
    w.line(std::string(name) + "," + csv_cell(mean) + "," + csv_cell(std::sqrt(var)));
    res.checks.push_back(detail::check_window(std::string(name) + "-mean", mean, lo, hi));
  };
  add("tanaka", tanaka);
  add("occupation", occupation);
  add("crossing", crossing);
  detail::note_csv(res, ctx, w.path());
  return res;
}

// ---------------------------------------------------------------------------
// rogers-prep: quadratic variation of the local-time profile in the space
// variable against four times the occupation integral.
// ---------------------------------------------------------------------------
inline ScenarioResult scenario_rogers_prep(const Config& cfg, const RunContext& ctx) {
  ScenarioResult res;
  res.name = "rogers-prep";
  long long seed = cfg.get_int("master_seed");
  long long reps = cfg.get_int("replicates", 1000);
  double horizon = cfg.get_real("horizon", 1.0);
  long long steps = cfg.get_int("steps", 100000);
  double a = cfg.get_real("a", -0.5);
  double b = cfg.get_real("b", 0.5);
  double spacing = cfg.get_real("spacing", 0.02);
  double bandwidth = cfg.get_real("bandwidth", 0.002);
  double rel_tol = cfg.get_real("tol.rel", 0.15);
  cfg.require_all_consumed();
  res.seed_note = "replicates=" + std::to_string(reps);

  std::vector<double> levels;
  for (double y = a; y <= b + 1e-12; y += spacing) levels.push_back(y);

  const std::size_t n = static_cast<std::size_t>(reps);
  std::vector<double> emp(n), formula(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    SamplePath p = gen_brownian({static_cast<std::uint64_t>(seed), i}, horizon,
                                static_cast<std::size_t>(steps));
    LocalTimeProfile prof = occupation_profile(p, horizon, levels, bandwidth);
    CompensatedSum qv;
    for (std::size_t k = 0; k + 1 < prof.value.size(); ++k) {
      double d = prof.value[k + 1] - prof.value[k];
      qv.add(d * d);
    }
    emp[i] = qv.value();
    formula[i] = 4.0 * (occupation_below(p, b, horizon) - occupation_below(p, a, horizon));
  });
  ExactSum se, sf;
  for (std::size_t i = 0; i < n; ++i) {
    se.add(emp[i]);
    sf.add(formula[i]);
  }
  double mean_emp = se.value() / static_cast<double>(n);
  double mean_formula = sf.value() / static_cast<double>(n);
  double rel = std::abs(mean_emp / mean_formula - 1.0);
  res.checks.push_back(detail::check_at_most("profile-qv-rel-err", rel, rel_tol));

  auto dir = detail::scenario_dir(ctx, res.name);
  {
    CsvWriter w(dir / "qv.csv", "replicate,empirical,formula");
    for (std::size_t i = 0; i < n; ++i) w.row(i, emp[i], formula[i]);
    detail::note_csv(res, ctx, w.path());
  }
  {
    SamplePath p0 = gen_brownian({static_cast<std::uint64_t>(seed), 0}, horizon,
                                 static_cast<std::size_t>(steps));
    LocalTimeProfile prof = occupation_profile(p0, horizon, levels, bandwidth);
    CsvWriter w(dir / "profile.csv", "level,value");
    for (std::size_t k = 0; k < prof.level.size(); ++k) w.row(prof.level[k], prof.value[k]);
    detail::note_csv(res, ctx, w.path());
  }
  return res;
}

// ---------------------------------------------------------------------------
// rogers-pvar: p-variation straddle for the occupation-minus-integral
// process on a dyadic ladder.
// ---------------------------------------------------------------------------
inline ScenarioResult scenario_rogers_pvar(const Config& cfg, const RunContext& ctx) {
  ScenarioResult res;
  res.name = "rogers-pvar";
  long long seed = cfg.get_int("master_seed");
  long long n_seeds = cfg.get_int("seeds", 10);
  long long steps = cfg.get_int("steps", 1048576);
  double horizon = cfg.get_real("horizon", 1.0);
  long long queries = cfg.get_int("queries", 1024);
  double delta_factor = cfg.get_real("delta_factor", 10.0);
  long long coarsest = cfg.get_int("coarsest_stride", 64);
  long long rungs = cfg.get_int("rungs", 7);
  double ratio = cfg.get_real("tol.p11_ratio", 1.2);
  double down_slack = cfg.get_real("tol.p2_slack", 0.0);
  long long min_seeds = cfg.get_int("tol.min_seeds", 8);
  cfg.require_all_consumed();
  res.seed_note = "seeds=" + std::to_string(n_seeds);

  double dt = horizon / static_cast<double>(steps);
  double delta = delta_factor * std::sqrt(dt);
  PartitionLadder ladder = dyadic_ladder(static_cast<std::size_t>(coarsest),
                                         static_cast<std::size_t>(rungs));
  double spacing = horizon / static_cast<double>(queries);

  const std::size_t n = static_cast<std::size_t>(n_seeds);
  std::vector<VariationReport> rep2(n), rep11(n);
  std::vector<char> pass2(n, 0), pass11(n, 0);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    SamplePath p = gen_brownian({static_cast<std::uint64_t>(seed), i}, horizon,
                                static_cast<std::size_t>(steps));
    auto pts = rogers_points(p, static_cast<std::size_t>(queries), delta);
    std::vector<double> x(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) x[k] = pts[k].x;
    rep2[i] = variation_report(x, spacing, 2.0, ladder, down_slack);
    rep11[i] = variation_report(x, spacing, 1.1, ladder, ratio - 1.0);
    pass2[i] = rep2[i].trend == Trend::Decreasing ? 1 : 0;
    pass11[i] = rep11[i].trend == Trend::Increasing ? 1 : 0;
  });
  long long n2 = 0, n11 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    n2 += pass2[i];
    n11 += pass11[i];
  }
  res.checks.push_back(detail::check_at_least("p2-decreasing-seeds",
                                              static_cast<double>(n2),
                                              static_cast<double>(min_seeds)));
  res.checks.push_back(detail::check_at_least("p11-increasing-seeds",
                                              static_cast<double>(n11),
                                              static_cast<double>(min_seeds)));

  auto dir = detail::scenario_dir(ctx, res.name);
  CsvWriter w(dir / "pvar.csv", "seed_stream,p,rung,mesh,value");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < rep2[i].mesh.size(); ++r)
      w.line(std::to_string(i) + ",2," + std::to_string(r) + "," +
             csv_cell(rep2[i].mesh[r]) + "," + csv_cell(rep2[i].value[r]));
    for (std::size_t r = 0; r < rep11[i].mesh.size(); ++r)
      w.line(std::to_string(i) + ",1.1," + std::to_string(r) + "," +
             csv_cell(rep11[i].mesh[r]) + "," + csv_cell(rep11[i].value[r]));
  }
  w.line(std::string("verdict,p2,") + std::to_string(n2) + "-of-" + std::to_string(n));
  w.line(std::string("verdict,p1.1,") + std::to_string(n11) + "-of-" + std::to_string(n));
  detail::note_csv(res, ctx, w.path());
  return res;
}

// ---------------------------------------------------------------------------
// flow-median: the comparison flow with the tent coefficient. Tail accuracy
// versus the closed forms, the breakpoint-sweep space-QV identities, the
// zero-energy decomposition of the level line, and the one-sided growth of
// the total variation of the spatial derivative.
// ---------------------------------------------------------------------------
inline ScenarioResult scenario_flow_median(const Config& cfg, const RunContext& ctx) {
  ScenarioResult res;
  res.name = "flow-median";
  long long seed = cfg.get_int("master_seed");
  double horizon = cfg.get_real("horizon", 1.0);
  std::string sig_mode = cfg.get_str("sigma", "canonical");

  // Tail block.
  long long tail_steps = cfg.get_int("tail.steps", 40000);
  double halv_lo = cfg.get_real("tol.tail_halving_lo", 1.4);
  double halv_hi = cfg.get_real("tol.tail_halving_hi", 2.6);

  // Space-QV block.
  long long sq_steps = cfg.get_int("spaceqv.steps", 100000);
  double sq_a = cfg.get_real("spaceqv.a", 0.3);
  double sq_b = cfg.get_real("spaceqv.b", 0.7);
  double sq_pad = cfg.get_real("spaceqv.pad", 0.05);
  double sq_dx = cfg.get_real("spaceqv.dx", 0.0005);
  double z_tol = cfg.get_real("tol.spaceqv_z_rel", 0.15);
  double dp_tol = cfg.get_real("tol.spaceqv_dprime_rel", 0.20);

  // Zero-energy block.
  long long ze_seeds = cfg.get_int("zeroenergy.seeds", 10);
  long long ze_steps = cfg.get_int("zeroenergy.steps", 100000);
  double ze_alpha = cfg.get_real("zeroenergy.alpha", 0.5);
  double ze_dx = cfg.get_real("zeroenergy.dx", 0.0011);
  std::vector<double> ze_stride_vals =
      cfg.get_reals("zeroenergy.strides", {4096, 1024, 128, 32, 8});
  double ze_decay = cfg.get_real("tol.zeroenergy_decay", 0.1);
  double ze_q_rel = cfg.get_real("tol.zeroenergy_q_rel", 0.25);
  long long ze_min_seeds = cfg.get_int("tol.zeroenergy_min_seeds", 8);

  // Total-variation block.
  long long tv_steps = cfg.get_int("tv.steps", 100000);
  double tv_sweep_a = cfg.get_real("tv.sweep_a", 0.4);
  double tv_sweep_b = cfg.get_real("tv.sweep_b", 0.6);
  double tv_avoid_a = cfg.get_real("tv.avoid_a", -0.9);
  double tv_avoid_b = cfg.get_real("tv.avoid_b", -0.8);
  double tv_coarse_dx = cfg.get_real("tv.coarse_dx", 0.001);
  long long tv_grids = cfg.get_int("tv.grids", 4);
  double tv_growth = cfg.get_real("tol.tv_growth", 1.5);
  double tv_plateau = cfg.get_real("tol.tv_plateau", 1.1);
  double tv_floor = cfg.get_real("tol.tv_floor", 1e-12);
  cfg.require_all_consumed();

  if (sig_mode != "canonical" && sig_mode != "zero")
    throw std::invalid_argument("flow-median: sigma must be canonical or zero");
  const bool zero_mode = sig_mode == "zero";
  // The zero coefficient freezes the flow, so every diagnostic must come out
  // exactly zero; the checks switch to that degenerate contract.
  auto sigma = zero_mode ? PiecewiseLinearSigma({0.5}, {0.0, 0.0}, 0.5, 0.0)
                         : PiecewiseLinearSigma::canonical();
  auto dir = detail::scenario_dir(ctx, res.name);

  // --- tails: same driver at two resolutions against the closed forms ----
  {
    SamplePath fine = gen_brownian({static_cast<std::uint64_t>(seed), 0}, horizon,
                                   static_cast<std::size_t>(tail_steps));
    SamplePath coarse = detail::subsample(fine, 4);
    std::vector<double> grid = {-1.0, 2.0};
    auto tail_error = [&](const SamplePath& drv) {
      double worst = 0.0;
      run_flow(sigma, grid, drv,
               [&](std::size_t k, const std::vector<double>& D, const std::vector<double>&,
                   const std::vector<double>&) {
                 double t = drv.t0 + static_cast<double>(k) * drv.dt;
                 double b = drv.values[k];
                 double lo = zero_mode ? grid[0] : -std::exp(b - 0.5 * t);
                 double hi = zero_mode ? grid[1] : 1.0 + std::exp(-b - 0.5 * t);
                 worst = std::max(worst, std::abs(D[0] - lo));
                 worst = std::max(worst, std::abs(D[1] - hi));
               });
      return worst;
    };
    double err_c = tail_error(coarse);
    double err_f = tail_error(fine);
    if (zero_mode) {
      res.checks.push_back(
          detail::check_at_most("tail-residual", std::max(err_c, err_f), 0.0));
    } else {
      double ratio = err_c / err_f;
      res.checks.push_back(
          detail::check_window("tail-error-halving", ratio, halv_lo, halv_hi));
    }
    CsvWriter w(dir / "tails.csv", "dt,max_error");
    w.row(coarse.dt, err_c);
    w.row(fine.dt, err_f);
    detail::note_csv(res, ctx, w.path());
  }

  // --- space-QV identities at the final time --------------------------------
  {
    std::vector<double> grid;
    for (double x = sq_a - sq_pad; x <= sq_b + sq_pad + 1e-12; x += sq_dx)
      grid.push_back(x);
    SamplePath drv = gen_brownian({static_cast<std::uint64_t>(seed), 1}, horizon,
                                  static_cast<std::size_t>(sq_steps));
    FlowOptions opt;
    opt.record_steps = {0, drv.steps()};
    FlowField f = simulate_flow(sigma, grid, drv, opt);
    SpaceQv z = space_qv_Z(f, sq_a, sq_b);
    PartitionLadder ladder = dyadic_ladder(8, 4);
    auto rungs = space_qv_Dprime(f, sq_a, sq_b, ladder);
    const ChainRung& finest = rungs.back();
    if (zero_mode) {
      double worst = std::max(std::max(std::abs(z.empirical), std::abs(z.formula)),
                              std::max(std::abs(finest.empirical), std::abs(finest.formula)));
      res.checks.push_back(detail::check_at_most("spaceqv-residual", worst, 0.0));
    } else {
      double z_rel = std::abs(z.empirical / z.formula - 1.0);
      res.checks.push_back(detail::check_at_most("spaceqv-z-rel-err", z_rel, z_tol));
      double dp_rel = std::abs(finest.empirical / finest.formula - 1.0);
      res.checks.push_back(detail::check_at_most("spaceqv-dprime-rel-err", dp_rel, dp_tol));
    }

    CsvWriter w(dir / "spaceqv.csv", "quantity,rung,mesh,value,formula");
    w.line(std::string("z,0,") + csv_cell(sq_dx) + "," + csv_cell(z.empirical) + "," +
           csv_cell(z.formula));
    for (std::size_t r = 0; r < rungs.size(); ++r)
      w.line(std::string("dprime,") + std::to_string(r) + "," + csv_cell(rungs[r].mesh) +
             "," + csv_cell(rungs[r].empirical) + "," + csv_cell(rungs[r].formula));
    detail::note_csv(res, ctx, w.path());
  }

  // --- zero-energy decomposition of the level line -------------------------
  {
    std::vector<double> grid;
    for (double x = -0.05; x <= 1.05 + 1e-12; x += ze_dx) grid.push_back(x);
    std::vector<std::size_t> strides;
    for (double v : ze_stride_vals) {
      if (!(v >= 1.0) || v != std::floor(v))
        throw std::invalid_argument("flow-median: zeroenergy.strides must be positive integers");
      strides.push_back(static_cast<std::size_t>(v));
    }
    PartitionLadder ladder = make_ladder(std::move(strides));
    const std::size_t n = static_cast<std::size_t>(ze_seeds);
    std::vector<ZeroEnergyReport> reports(n);
    std::vector<char> a_ok(n, 0), q_ok(n, 0);
    parallel_for(n, ctx.threads, [&](std::size_t i) {
      SamplePath drv = gen_brownian({static_cast<std::uint64_t>(seed), 100 + i}, horizon,
                                    static_cast<std::size_t>(ze_steps));
      ZeroEnergyReport r =
          zero_energy_residual(sigma, grid, drv, ze_alpha, ladder.strides);
      bool decreasing = true;
      for (std::size_t k = 0; k + 1 < r.qv_A.size(); ++k)
        if (!(r.qv_A[k + 1] < r.qv_A[k])) decreasing = false;
      a_ok[i] = (decreasing && r.qv_A.back() <= ze_decay * r.qv_A.front()) ? 1 : 0;
      q_ok[i] = std::abs(r.qv_q.back() / r.mart_qv - 1.0) <= ze_q_rel ? 1 : 0;
      r.q.clear();
      r.A.clear();
      reports[i] = std::move(r);
    });
    if (zero_mode) {
      double worst = 0.0;
      for (const auto& r : reports) {
        for (double v : r.qv_A) worst = std::max(worst, std::abs(v));
        for (double v : r.qv_q) worst = std::max(worst, std::abs(v));
        worst = std::max(worst, std::abs(r.mart_qv));
      }
      res.checks.push_back(detail::check_at_most("zeroenergy-residual", worst, 0.0));
    } else {
      long long na = 0, nq = 0;
      for (std::size_t i = 0; i < n; ++i) {
        na += a_ok[i];
        nq += q_ok[i];
      }
      res.checks.push_back(detail::check_at_least("zeroenergy-a-seeds",
                                                  static_cast<double>(na),
                                                  static_cast<double>(ze_min_seeds)));
      res.checks.push_back(detail::check_at_least("zeroenergy-q-seeds",
                                                  static_cast<double>(nq),
                                                  static_cast<double>(ze_min_seeds)));
    }
    CsvWriter w(dir / "zeroenergy.csv", "seed_stream,rung,mesh,qv_A,qv_q,mart_qv");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t r = 0; r < reports[i].mesh.size(); ++r)
        w.line(std::to_string(i) + "," + std::to_string(r) + "," +
               csv_cell(reports[i].mesh[r]) + "," + csv_cell(reports[i].qv_A[r]) + "," +
               csv_cell(reports[i].qv_q[r]) + "," + csv_cell(reports[i].mart_qv));
    detail::note_csv(res, ctx, w.path());
  }

  // --- total variation growth of the spatial derivative --------------------
  {
    SamplePath drv = gen_brownian({static_cast<std::uint64_t>(seed), 2}, horizon,
                                  static_cast<std::size_t>(tv_steps));
    auto tv_at = [&](double a, double b, double dx) {
      std::vector<double> grid;
      for (double x = a; x <= b + 1e-12; x += dx) grid.push_back(x);
      FlowOptions opt;
      opt.record_steps = {0, drv.steps()};
      FlowField f = simulate_flow(sigma, grid, drv, opt);
      return total_variation(f.Dprime.back());
    };
    std::vector<double> sweep_tv, avoid_tv, pitches;
    double dx = tv_coarse_dx;
    for (long long g = 0; g < tv_grids; ++g) {
      pitches.push_back(dx);
      sweep_tv.push_back(tv_at(tv_sweep_a, tv_sweep_b, dx));
      avoid_tv.push_back(tv_at(tv_avoid_a, tv_avoid_b, dx));
      dx /= 4.0;
    }
    if (zero_mode) {
      double worst = 0.0;
      for (double v : sweep_tv) worst = std::max(worst, std::abs(v));
      for (double v : avoid_tv) worst = std::max(worst, std::abs(v));
      res.checks.push_back(detail::check_at_most("tv-residual", worst, 0.0));
    } else {
      double min_growth = std::numeric_limits<double>::infinity();
      for (std::size_t g = 0; g + 1 < sweep_tv.size(); ++g)
        min_growth = std::min(min_growth, sweep_tv[g + 1] / sweep_tv[g]);
      res.checks.push_back(
          detail::check_at_least("tv-sweep-growth-min", min_growth, tv_growth));
      double plateau_worst = 0.0;
      for (std::size_t g = 0; g + 1 < avoid_tv.size(); ++g) {
        double denom = std::max(avoid_tv[g], tv_floor);
        plateau_worst = std::max(plateau_worst, avoid_tv[g + 1] / denom);
      }
      bool plateau_pass = avoid_tv.back() <= tv_floor || plateau_worst <= tv_plateau;
      res.checks.push_back({"tv-plateau-growth-max", plateau_pass, plateau_worst,
                            "<=" + csv_cell(tv_plateau)});
    }
    CsvWriter w(dir / "tv.csv", "interval,pitch,tv");
    for (std::size_t g = 0; g < pitches.size(); ++g) {
      w.line(std::string("sweep,") + csv_cell(pitches[g]) + "," + csv_cell(sweep_tv[g]));
      w.line(std::string("avoid,") + csv_cell(pitches[g]) + "," + csv_cell(avoid_tv[g]));
    }
    detail::note_csv(res, ctx, w.path());
  }
  return res;
}

// ---------------------------------------------------------------------------
// lamperti-check: the scale-coordinate correspondence with the sign-drift
// walk, and the restart consistency of the flow.
// ---------------------------------------------------------------------------
inline ScenarioResult scenario_lamperti_check(const Config& cfg, const RunContext& ctx) {
  ScenarioResult res;
  res.name = "lamperti-check";
  long long seed = cfg.get_int("master_seed");
  double horizon = cfg.get_real("horizon", 1.0);
  long long steps = cfg.get_int("steps", 100000);
  std::vector<double> starts = cfg.get_reals("starts");
  double beta = cfg.get_real("beta", 0.5);
  double split_s = cfg.get_real("split_s", 0.5);
  double map_tol = cfg.get_real("tol.map_err");
  double comp_tol = cfg.get_real("tol.compose");
  double comp_dx = cfg.get_real("compose.dx", 0.0075);
  cfg.require_all_consumed();

  auto sigma = PiecewiseLinearSigma::canonical();
  LampertiMap p = lamperti_map(sigma, 0.5);
  auto dir = detail::scenario_dir(ctx, res.name);
  CsvWriter w(dir / "lamperti.csv", "start,max_discrepancy");

  double worst = 0.0;
  for (std::size_t si = 0; si < starts.size(); ++si) {
    SamplePath drv = gen_brownian({static_cast<std::uint64_t>(seed), si}, horizon,
                                  static_cast<std::size_t>(steps));
    std::vector<double> grid = {starts[si]};
    std::vector<double> mapped;
    mapped.reserve(drv.values.size());
    run_flow(sigma, grid, drv,
             [&](std::size_t, const std::vector<double>& D, const std::vector<double>&,
                 const std::vector<double>&) { mapped.push_back(p(D[0])); });
    SamplePath g = simulate_sign_sde(beta, p(starts[si]), drv);
    double m = 0.0;
    for (std::size_t k = 0; k < g.values.size(); ++k)
      m = std::max(m, std::abs(g.values[k] - mapped[k]));
    w.row(starts[si], m);
    worst = std::max(worst, m);
  }
  res.checks.push_back(detail::check_at_most("lamperti-map-err", worst, map_tol));

  {
    SamplePath drv = gen_brownian({static_cast<std::uint64_t>(seed), 50}, horizon,
                                  static_cast<std::size_t>(steps));
    std::vector<double> grid;
    for (double x = -0.1; x <= 1.1 + 1e-12; x += comp_dx) grid.push_back(x);
    double disc = compose_flow_check(sigma, grid, drv, split_s);
    res.checks.push_back(detail::check_at_most("compose-discrepancy", disc, comp_tol));
    w.line(std::string("compose,") + csv_cell(disc));
  }
  detail::note_csv(res, ctx, w.path());
  return res;
}

// ---------------------------------------------------------------------------
// Registry, dispatch, summary.
// ---------------------------------------------------------------------------
using ScenarioFn = ScenarioResult (*)(const Config&, const RunContext&);

inline const std::map<std::string, ScenarioFn>& scenario_registry() {
  static const std::map<std::string, ScenarioFn> reg = {
      {"bm-dc", &scenario_bm_dc},
      {"integrated-bm", &scenario_integrated_bm},
      {"integrated-fbm", &scenario_integrated_fbm},
      {"crossing-lt", &scenario_crossing_lt},
      {"rogers-prep", &scenario_rogers_prep},
      {"rogers-pvar", &scenario_rogers_pvar},
      {"flow-median", &scenario_flow_median},
      {"lamperti-check", &scenario_lamperti_check},
  };
  return reg;
}

struct UnknownScenarioError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline ScenarioResult run_scenario(const Config& cfg, const RunContext& ctx) {
  std::string name = cfg.get_str("scenario");
  auto it = scenario_registry().find(name);
  if (it == scenario_registry().end())
    throw UnknownScenarioError("unknown scenario '" + name + "'");
  ScenarioResult res = it->second(cfg, ctx);
  res.config_hash = cfg.hash();
  res.master_seed = cfg.get_int("master_seed");
  return res;
}

inline std::string render_summary(const ScenarioResult& res) {
  require(!res.checks.empty(), "summary: no checks to report");
  std::string out;
  out += "# summary\n";
  out += "scenario = " + res.name + "\n";
  out += std::string("version = ") + kToolkitVersion + "\n";
  char hash[32];
  std::snprintf(hash, sizeof hash, "0x%016llx",
                static_cast<unsigned long long>(res.config_hash));
  out += std::string("config_hash = ") + hash + "\n";
  out += "master_seed = " + std::to_string(res.master_seed) + "\n";
  if (!res.seed_note.empty()) out += "seed_set = " + res.seed_note + "\n";
  for (const auto& f : res.csv_files) out += "csv = " + f + "\n";
  for (const auto& c : res.checks)
    out += "CHECK " + c.name + (c.pass ? " PASS " : " FAIL ") + csv_cell(c.value) + " " +
           c.tolerance + "\n";
  out += std::string("RESULT ") + (res.all_pass() ? "PASS" : "FAIL") + "\n";
  return out;
}

inline std::filesystem::path write_summary(const ScenarioResult& res,
                                           const RunContext& ctx) {
  auto dir = detail::scenario_dir(ctx, res.name);
  std::filesystem::create_directories(dir);
  auto file = dir / "summary.txt";
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << render_summary(res);
  return file;
}

}  // namespace smdiag
