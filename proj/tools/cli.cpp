#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bgwtilt/casebook.hpp"
#include "bgwtilt/chi.hpp"
#include "bgwtilt/errors.hpp"
#include "bgwtilt/family_io.hpp"
#include "bgwtilt/rng.hpp"
#include "bgwtilt/sampling.hpp"
#include "bgwtilt/spectral.hpp"
#include "bgwtilt/validate.hpp"

#ifndef BGWTILT_VERSION
#define BGWTILT_VERSION "0.0.0"
#endif

namespace bgwtilt::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec parse_vec(const std::string& text, int k, const std::string& what) {
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::vector<double> xs;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      xs.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InputError(what + ": cannot parse '" + tok + "'");
    }
  }
  if (static_cast<int>(xs.size()) != k)
    throw InputError(what + " needs " + std::to_string(k) + " entries, got " + std::to_string(xs.size()));
  return Eigen::Map<Vec>(xs.data(), k);
}

IntRow parse_row(const std::string& text, const std::string& what) {
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  IntRow r;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      r.push_back(std::stoll(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InputError(what + ": cannot parse '" + tok + "'");
    }
  }
  if (r.empty()) throw InputError(what + " is empty");
  return r;
}

GammaConstraint parse_gamma(const std::string& text, int k) {
  GammaConstraint g = GammaConstraint::parse(text);
  if (g.types() != k) throw InputError("--gamma has " + std::to_string(g.types()) + " columns, family has K = " + std::to_string(k));
  return g;
}

std::string row_label(const IntRow& r) {
  std::string s;
  for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "_" : "") + std::to_string(r[i]);
  return s;
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("BGWTILT_THREADS"); env && *env) {
    try {
      std::size_t used = 0;
      const int t = std::stoi(env, &used);
      if (used == std::string(env).size() && t > 0) return t;
    } catch (const std::exception&) {
    }
    throw InputError(std::string("BGWTILT_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

// Per-invocation state: where outputs go and what the manifest records.
struct Run {
  Run(std::vector<std::string> a, std::ostream& o, std::ostream& e) : args(std::move(a)), out(o), err(e) {}

  std::vector<std::string> args;
  std::ostream& out;
  std::ostream& err;
  std::string out_dir = ".";
  int threads_flag = 0;
  int threads = 1;
  std::string command;
  json config;
  json seeds = json::array();
  std::vector<std::string> outputs;

  fs::path path(const std::string& name) const { return fs::path(out_dir) / name; }

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(out_dir);
    std::ofstream f(path(name), std::ios::binary);
    if (!f) throw InputError("cannot write '" + path(name).string() + "'");
    f << content;
    outputs.push_back(name);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  LoadedFamily load(std::string& family_arg) {
    LoadedFamily fam = load_family(family_arg);
    const std::string abs = fs::absolute(family_arg).lexically_normal().string();
    std::replace(args.begin(), args.end(), family_arg, abs);
    config = fam.source;
    return fam;
  }
};

const OrderedFamily& need_ordered(const LoadedFamily& fam) {
  if (!fam.ordered) throw InputError("this command needs a family with finite support");
  return *fam.ordered;
}

int check_root(int root, int k) {
  if (root < 1 || root > k) throw InputError("--root must be in 1.." + std::to_string(k));
  return root - 1;
}

void check_samples(int n) {
  if (n < 1) throw InputError("--samples must be >= 1");
}

json solve_json(const ProjectedFamily& mu, const CriticalSolveResult& r) {
  return {{"status", "converged"},
          {"theta_star", vec_json(r.theta_star)},
          {"X_star", vec_json(r.X_star)},
          {"lambda", r.lambda},
          {"objective", r.objective},
          {"rho", rho_at(mu, r.theta_star)},
          {"residuals",
           {{"rho_gap", r.residuals.rho_gap},
            {"equivalence_residual", r.residuals.equivalence_residual},
            {"gradient_norm", r.residuals.gradient_norm}}},
          {"cone_case", to_string(r.cone_case)},
          {"iterations", r.iterations},
          {"final_penalty", r.final_penalty},
          {"start", r.start}};
}

// ---- validate

int cmd_validate(Run& run, std::string family, const std::vector<std::string>& require) {
  LoadedFamily fam = run.load(family);
  const ValidationReport rep = validate(fam.projected);
  const std::map<std::string, bool> flags{{"entire", rep.entire},         {"finite", rep.finite},
                                          {"nondegenerate", rep.nondegenerate}, {"nonlocalized", rep.nonlocalized},
                                          {"irreducible", rep.irreducible}, {"aperiodic", rep.aperiodic}};
  std::vector<std::string> wanted = require;
  if (wanted.empty())
    for (const auto& [name, v] : flags) wanted.push_back(name);
  bool ok = true;
  for (const auto& w : wanted) {
    auto it = flags.find(w);
    if (it == flags.end()) throw InputError("unknown flag '" + w + "' in --require");
    ok = ok && it->second;
  }

  for (const char* name : {"entire", "finite", "nondegenerate", "nonlocalized", "irreducible", "aperiodic"})
    run.out << std::left << std::setw(15) << name << (flags.at(name) ? "yes" : "no") << "\n";
  if (rep.declared) run.out << "(flags declared by the analytic family)\n";
  for (const auto& r : rep.reasons) run.out << "  " << r << "\n";

  json j{{"flags", flags}, {"declared", rep.declared}, {"reasons", rep.reasons}, {"required", wanted}, {"ok", ok}};
  if (rep.extinction_probs.size()) j["extinction_probs"] = vec_json(rep.extinction_probs);
  run.write_json("validate.json", j);
  return ok ? kOk : kPropertyFailed;
}

// ---- find-critical

int cmd_find_critical(Run& run, std::string family, const std::string& gamma_text, const std::string& direction,
                      const std::string& theta_bar_text) {
  LoadedFamily fam = run.load(family);
  const int k = fam.types;
  const Vec X = direction.empty() ? Vec(Vec::Constant(k, 1.0 / k)) : parse_vec(direction, k, "--direction");
  const Vec theta_bar = theta_bar_text.empty() ? Vec(Vec::Zero(k)) : parse_vec(theta_bar_text, k, "--theta-bar");
  try {
    CriticalSolveResult r;
    if (gamma_text.empty()) {
      r = critical_for_direction(fam.projected, X);
    } else {
      r = find_critical_equivalent(fam.projected, parse_gamma(gamma_text, k), theta_bar, X);
    }
    json j = solve_json(fam.projected, r);
    run.write_json("find_critical.json", j);
    run.out << j.dump(2) << "\n";
    return kOk;
  } catch (const SolverDivergence& e) {
    run.write_json("find_critical.json",
                   {{"status", "divergence"}, {"message", e.what()}, {"trajectory", e.trajectory()}});
    run.err << "solver divergence: " << e.what() << "\n";
    for (const auto& line : e.trajectory()) run.err << "  " << line << "\n";
    return kDivergence;
  } catch (const NegativeScaleError& e) {
    run.write_json("find_critical.json", {{"status", "negative_scale"}, {"message", e.what()}, {"lambda", e.lambda()}});
    run.err << e.what() << "\n";
    return kPropertyFailed;
  }
}

// ---- boundary

std::string boundary_svg(const BoundaryTrace& trace) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& p : trace.points) {
    x0 = std::min(x0, p.chi[0]);
    x1 = std::max(x1, p.chi[0]);
    y0 = std::min(y0, p.chi[1]);
    y1 = std::max(y1, p.chi[1]);
  }
  const double w = 600, h = 600, pad = 40;
  const double sx = x1 > x0 ? (w - 2 * pad) / (x1 - x0) : 1;
  const double sy = y1 > y0 ? (h - 2 * pad) / (y1 - y0) : 1;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\"0 0 600 600\">\n"
    << "<rect width=\"600\" height=\"600\" fill=\"white\"/>\n"
    << "<text x=\"300\" y=\"590\" font-size=\"14\" text-anchor=\"middle\">chi1</text>\n"
    << "<text x=\"12\" y=\"300\" font-size=\"14\" transform=\"rotate(-90 12 300)\" text-anchor=\"middle\">chi2</text>\n"
    << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << w - 2 * pad << "\" height=\"" << h - 2 * pad
    << "\" fill=\"none\" stroke=\"#999\"/>\n";
  s << "<text x=\"" << pad << "\" y=\"" << h - pad + 16 << "\" font-size=\"11\">" << num(x0) << "</text>\n";
  s << "<text x=\"" << w - pad << "\" y=\"" << h - pad + 16 << "\" font-size=\"11\" text-anchor=\"end\">" << num(x1)
    << "</text>\n";
  s << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\" points=\"";
  for (const auto& p : trace.points) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f,%.3f ", pad + (p.chi[0] - x0) * sx, h - pad - (p.chi[1] - y0) * sy);
    s << buf;
  }
  s << "\"/>\n</svg>\n";
  return s.str();
}

int cmd_boundary(Run& run, std::string family, int points, double margin, bool full_range, bool caption) {
  LoadedFamily fam = run.load(family);
  if (fam.types != 2) throw InputError("boundary needs K = 2, family has K = " + std::to_string(fam.types));
  if (points < 1) throw InputError("--points must be >= 1");
  TraceOptions opts;
  opts.margin = margin;
  opts.auto_range = !full_range;
  opts.threads = run.threads;
  const BoundaryTrace trace = trace_boundary(fam.projected, points, opts);

  std::string csv = "t,theta1,theta2,chi1,chi2\n";
  for (const auto& p : trace.points)
    csv += num(p.t) + "," + num(p.theta[0]) + "," + num(p.theta[1]) + "," + num(p.chi[0]) + "," + num(p.chi[1]) + "\n";
  run.write("boundary.csv", csv);
  run.write("boundary.svg", boundary_svg(trace));

  json failures = json::array();
  for (const auto& [t, msg] : trace.failures) failures.push_back({{"t", t}, {"message", msg}});
  json j{{"points", trace.points.size()}, {"t_min", trace.t_min}, {"t_max", trace.t_max}, {"failures", failures}};
  int code = kOk;
  if (caption) {
    double max_gap = 0;
    std::string ccsv = "s,chi1_paper,chi2_paper,chi1_traced,chi2_traced,gap\n";
    for (const auto& m : compare_with_caption(trace)) {
      max_gap = std::max(max_gap, m.gap);
      ccsv += num(m.s) + "," + num(m.chi1_paper) + "," + num(m.chi2_paper) + "," + num(m.chi1_traced) + "," +
              num(m.chi2_traced) + "," + num(m.gap) + "\n";
    }
    run.write("caption.csv", ccsv);
    j["caption_max_gap"] = max_gap;
    if (max_gap > 1e-6) code = kPropertyFailed;
  }
  run.write_json("boundary.json", j);
  run.out << "traced " << trace.points.size() << " points on t in [" << num(trace.t_min) << ", " << num(trace.t_max)
          << "]";
  if (caption) run.out << ", caption max gap " << num(j["caption_max_gap"].get<double>());
  run.out << "\n";
  return code;
}

// ---- sample / kesten / locallimit

struct SampleArgs {
  std::string family;
  int root = 1;
  int samples = 0;
  std::uint64_t seed = 0;
  std::string gamma;
  std::string g;
  int cap = 1'000'000;
  std::int64_t attempts = 100'000'000;
};

int cmd_sample(Run& run, SampleArgs a) {
  LoadedFamily fam = run.load(a.family);
  const OrderedFamily& zeta = need_ordered(fam);
  const int root = check_root(a.root, fam.types);
  check_samples(a.samples);
  run.seeds.push_back(a.seed);
  SampleSpec spec{a.seed, a.cap, a.attempts, run.threads};
  spec.check();

  std::ostringstream trees;
  json j{{"seed", a.seed}, {"root", a.root}, {"samples", a.samples}};
  if (!a.gamma.empty() || !a.g.empty()) {
    if (a.gamma.empty() || a.g.empty()) throw InputError("--gamma and --g go together");
    const GammaConstraint gamma = parse_gamma(a.gamma, fam.types).with_target(parse_row(a.g, "--g"));
    const ConditionedBatch batch = sample_conditioned_batch(zeta, gamma, root, spec, a.samples);
    for (std::size_t i = 0; i < batch.trees.size(); ++i)
      trees << "# tree " << i << " vertices " << batch.trees[i].size() << "\n" << batch.trees[i].serialize() << "\n";
    j["g"] = *gamma.target();
    j["attempts"] = batch.attempts;
    j["acceptance_rate"] = batch.acceptance_rate();
  } else {
    const TreeSampler sampler(zeta);
    std::int64_t overflows = 0;
    double total = 0;
    for (int i = 0; i < a.samples; ++i) {
      auto t = sampler.sample(root, a.seed, static_cast<std::uint64_t>(i), a.cap);
      if (auto* tree = std::get_if<MultitypeTree>(&t)) {
        trees << "# tree " << i << " vertices " << tree->size() << "\n" << tree->serialize() << "\n";
        total += tree->size();
      } else {
        trees << "# tree " << i << " overflow cap " << a.cap << "\n\n";
        ++overflows;
      }
    }
    j["overflows"] = overflows;
    j["mean_size"] = overflows < a.samples ? total / static_cast<double>(a.samples - overflows) : 0.0;
  }
  run.write("trees.txt", trees.str());
  run.write_json("sample.json", j);
  run.out << j.dump(2) << "\n";
  return kOk;
}

std::string ball_csv(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::string, std::pair<double, double>> freq;
  for (const auto& s : a) freq[s].first += 1.0 / static_cast<double>(a.size());
  for (const auto& s : b) freq[s].second += 1.0 / static_cast<double>(b.size());
  std::string csv = "signature,freq_a,freq_b\n";
  for (const auto& [sig, f] : freq) csv += "\"" + sig + "\"," + num(f.first) + "," + num(f.second) + "\n";
  return csv;
}

int cmd_kesten(Run& run, SampleArgs a, int depth, int r) {
  LoadedFamily fam = run.load(a.family);
  const OrderedFamily& zeta = need_ordered(fam);
  const int root = check_root(a.root, fam.types);
  check_samples(a.samples);
  if (depth < 0) throw InputError("--depth must be >= 0");
  if (r > depth) throw InputError("--r must not exceed --depth");
  run.seeds.push_back(a.seed);

  const KestenSampler sampler(zeta);
  std::ostringstream out;
  std::vector<std::string> balls;
  double total = 0;
  for (int i = 0; i < a.samples; ++i) {
    const KestenPrefix p = sampler.sample(root, depth, a.seed, static_cast<std::uint64_t>(i), a.cap);
    out << "# prefix " << i << " vertices " << p.tree.size() << " spine";
    for (int v : p.spine) out << " " << v;
    out << "\n" << p.tree.serialize() << "\n";
    total += p.tree.size();
    if (r >= 0) balls.push_back(ball(p, r));
  }
  run.write("kesten.txt", out.str());
  json j{{"seed", a.seed}, {"root", a.root}, {"depth", depth}, {"samples", a.samples},
         {"mean_size", total / a.samples}, {"b", vec_json(sampler.b())}};
  if (r >= 0) {
    std::map<std::string, int> counts;
    for (const auto& s : balls) ++counts[s];
    std::string csv = "signature,count,freq\n";
    for (const auto& [sig, c] : counts) csv += "\"" + sig + "\"," + std::to_string(c) + "," + num(static_cast<double>(c) / a.samples) + "\n";
    run.write("kesten_balls.csv", csv);
    j["r"] = r;
  }
  run.write_json("kesten.json", j);
  run.out << j.dump(2) << "\n";
  return kOk;
}

int cmd_locallimit(Run& run, SampleArgs a, const std::vector<std::string>& targets, int r,
                   const std::string& direction, const std::string& theta_bar_text) {
  LoadedFamily fam = run.load(a.family);
  const OrderedFamily& zeta = need_ordered(fam);
  const int k = fam.types;
  const int root = check_root(a.root, k);
  check_samples(a.samples);
  if (r < 0) throw InputError("--r must be >= 0");
  if (targets.empty()) throw InputError("locallimit needs at least one --g");
  const GammaConstraint gamma = parse_gamma(a.gamma, k);
  const Vec X = direction.empty() ? Vec(Vec::Constant(k, 1.0 / k)) : parse_vec(direction, k, "--direction");
  const Vec theta_bar = theta_bar_text.empty() ? Vec(Vec::Zero(k)) : parse_vec(theta_bar_text, k, "--theta-bar");
  run.seeds.push_back(a.seed);

  // Conditioned laws are unchanged by the equivalent tilt, which is critical.
  const CriticalSolveResult sol = find_critical_equivalent(fam.projected, gamma, theta_bar, X);
  const OrderedFamily tilted = tilt_ordered(zeta, sol.theta_star);

  const std::uint64_t kesten_seed = rng::derive(a.seed, 0x4b);
  const KestenSampler kesten(tilted);
  std::vector<std::string> kballs;
  kballs.reserve(a.samples);
  for (int i = 0; i < a.samples; ++i)
    kballs.push_back(ball(kesten.sample(root, r, kesten_seed, static_cast<std::uint64_t>(i), a.cap), r));

  SampleSpec spec{a.seed, a.cap, a.attempts, run.threads};
  spec.check();
  std::string csv = "g,tv,accepted,attempts,acceptance_rate\n";
  json rows = json::array();
  std::vector<double> tvs;
  for (const auto& text : targets) {
    const IntRow g = parse_row(text, "--g");
    const ConditionedBatch batch = sample_conditioned_batch(tilted, gamma.with_target(g), root, spec, a.samples);
    std::vector<std::string> cballs;
    cballs.reserve(batch.trees.size());
    for (const auto& t : batch.trees) cballs.push_back(ball(t, r));
    const double tv = empirical_tv(cballs, kballs);
    tvs.push_back(tv);
    const std::string label = row_label(g);
    run.write("balls_g" + label + ".csv", ball_csv(cballs, kballs));
    csv += label + "," + num(tv) + "," + std::to_string(batch.trees.size()) + "," + std::to_string(batch.attempts) +
           "," + num(batch.acceptance_rate()) + "\n";
    rows.push_back({{"g", g}, {"tv", tv}, {"accepted", batch.trees.size()}, {"attempts", batch.attempts},
                    {"acceptance_rate", batch.acceptance_rate()}});
    run.out << "g=" << label << " tv=" << num(tv) << " acceptance=" << num(batch.acceptance_rate()) << "\n";
  }
  bool nonincreasing = true;
  for (std::size_t i = 1; i < tvs.size(); ++i) nonincreasing = nonincreasing && tvs[i] <= tvs[i - 1];
  run.write("locallimit.csv", csv);
  run.write_json("locallimit.json", {{"seed", a.seed},
                                     {"root", a.root},
                                     {"r", r},
                                     {"samples", a.samples},
                                     {"critical", solve_json(fam.projected, sol)},
                                     {"rows", rows},
                                     {"tv_nonincreasing", nonincreasing}});
  return kOk;
}

// ---- appendix

int cmd_appendix_a(Run& run, std::optional<double> A, std::optional<double> eps, std::vector<double> s_values,
                   int curve_points) {
  if (A.has_value() != eps.has_value()) throw InputError("--A and --eps go together");
  std::vector<std::pair<double, double>> grid;
  if (A) {
    grid.emplace_back(*A, *eps);
  } else {
    for (double a : {5.0, 10.0, 20.0})
      for (double e : {1e-3, 1e-2}) grid.emplace_back(a, e);
  }
  if (s_values.empty()) throw InputError("--s needs at least one value");
  for (double s : s_values)
    if (!(s > 0)) throw InputError("--s values must be positive");
  if (eps && *eps < 0) throw InputError("--eps must be >= 0");
  AppendixAScanOptions opts;
  opts.s_values = s_values;
  opts.curve_points = curve_points;

  std::string csv = "A,eps,s,min_residual,theta1,theta2,gap,C,exceeds_bound,solver_converged\n";
  json reports = json::array();
  for (const auto& [a, e] : grid) {
    const AppendixAReport rep = appendix_a_scan(a, e, opts);
    json rows = json::array();
    for (const auto& row : rep.rows) {
      csv += num(a) + "," + num(e) + "," + num(row.s) + "," + num(row.min_residual) + "," + num(row.theta1) + "," +
             num(row.theta2) + "," + num(row.gap) + "," + num(row.C) + "," + (row.exceeds_bound ? "1" : "0") + "," +
             (row.solver_converged ? "1" : "0") + "\n";
      rows.push_back({{"s", row.s}, {"min_residual", row.min_residual}, {"theta1", row.theta1},
                      {"theta2", row.theta2}, {"gap", row.gap}, {"C", row.C},
                      {"exceeds_bound", row.exceeds_bound}, {"solver_converged", row.solver_converged},
                      {"solver", row.solver_summary}});
    }
    // Same A without the perturbation: the solver should find the equivalent.
    json control;
    try {
      const GammaConstraint gamma({{6, 1}});
      const Vec theta_bar = (Vec(2) << -s_values.front(), s_values.front()).finished();
      const auto sol = find_critical_equivalent(appendix_a_family(a, 0.0), gamma, theta_bar, opts.direction);
      control = solve_json(appendix_a_family(a, 0.0), sol);
    } catch (const SolverDivergence& ex) {
      control = {{"status", "divergence"}, {"message", ex.what()}};
    }
    reports.push_back({{"A", a}, {"eps", e}, {"critical_points", rep.critical_points},
                       {"max_theta1", rep.max_theta1}, {"theta1_below_one", rep.theta1_below_one},
                       {"divergence_evidence", rep.divergence_evidence}, {"statement", rep.statement},
                       {"rows", rows}, {"control_eps0", control}});
    run.out << "A=" << num(a) << " eps=" << num(e) << ": " << rep.statement << "\n";
  }
  json j{{"gamma", {6, 1}}, {"reports", reports}};
  if (!A) j["note"] = "default grid A in {5, 10, 20}, eps in {1e-3, 1e-2}";
  run.write("appendix_a.csv", csv);
  run.write_json("appendix_a.json", j);
  return kOk;
}

int cmd_appendix_b(Run& run, int N) {
  if (N < 3) throw InputError("--N must be >= 3");
  const AppendixBResult res = appendix_b_preimages(N);
  std::string csv = "index";
  for (int i = 1; i <= 2 * N; ++i) csv += ",theta" + std::to_string(i);
  csv += ",chi_norm\n";
  double max_chi = 0;
  for (std::size_t i = 0; i < res.preimages.size(); ++i) {
    csv += std::to_string(i);
    for (Eigen::Index c = 0; c < res.preimages[i].size(); ++c) csv += "," + num(res.preimages[i][c]);
    csv += "," + num(res.chi_norms[i]) + "\n";
    max_chi = std::max(max_chi, res.chi_norms[i]);
  }
  bool distinct = true;
  for (std::size_t i = 0; i < res.preimages.size(); ++i)
    for (std::size_t j = i + 1; j < res.preimages.size(); ++j)
      if ((res.preimages[i] - res.preimages[j]).cwiseAbs().maxCoeff() < 1e-12) distinct = false;
  double binom = 1;
  for (int i = 1; i <= N; ++i) binom = binom * (N + i) / i;
  const bool ok = distinct && static_cast<double>(res.preimages.size()) == std::round(binom) && max_chi <= 1e-10;
  run.write("appendix_b.csv", csv);
  run.write_json("appendix_b.json", {{"N", N},
                                     {"delta", res.delta},
                                     {"preimages", res.preimages.size()},
                                     {"expected", std::lround(binom)},
                                     {"distinct", distinct},
                                     {"max_chi_norm", max_chi},
                                     {"ok", ok}});
  run.out << res.preimages.size() << " preimages, delta " << num(res.delta) << ", max |chi| " << num(max_chi) << "\n";
  return ok ? kOk : kPropertyFailed;
}

// ---- replay

std::vector<std::string> replay_args(const std::string& manifest, const std::string& out_dir) {
  std::ifstream in(manifest);
  if (!in) throw InputError("cannot open manifest '" + manifest + "'");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("manifest '" + manifest + "': " + e.what());
  }
  if (!m.contains("args") || !m["args"].is_array()) throw InputError("manifest has no args");
  std::vector<std::string> args;
  const auto stored = m["args"].get<std::vector<std::string>>();
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (!out_dir.empty() && stored[i] == "--out-dir" && i + 1 < stored.size()) {
      ++i;
      continue;
    }
    if (!out_dir.empty() && stored[i].rfind("--out-dir=", 0) == 0) continue;
    args.push_back(stored[i]);
  }
  if (!out_dir.empty()) {
    args.push_back("--out-dir");
    args.push_back(out_dir);
  }
  return args;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int execute(Run& run, const std::function<int()>& body) {
  run.threads = resolve_threads(run.threads_flag);
  const auto t0 = std::chrono::steady_clock::now();
  const int code = body();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest{{"command", run.command},
                {"args", run.args},
                {"config", run.config},
                {"seeds", run.seeds},
                {"version", BGWTILT_VERSION},
                {"threads", run.threads},
                {"wall_time_seconds", wall},
                {"exit_code", code},
                {"outputs", run.outputs}};
  const std::string name = [&] {
    std::string s = run.command;
    std::replace(s.begin(), s.end(), ' ', '_');
    std::replace(s.begin(), s.end(), '-', '_');
    return s + ".manifest.json";
  }();
  fs::create_directories(run.out_dir);
  std::ofstream(run.path(name)) << manifest.dump(2) << "\n";
  return code;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tilted multitype BGW trees: chi map, critical equivalent tilts, conditioned and Kesten sampling",
               "bgwtilt"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", BGWTILT_VERSION);

  Run run{args, out, err};
  app.add_option("--out-dir", run.out_dir, "Directory for reports")->capture_default_str();
  app.add_option("--threads", run.threads_flag, "Worker threads (default: BGWTILT_THREADS or 1)");

  std::string family;
  std::function<int()> body;

  auto* v = app.add_subcommand("validate", "Check the standing hypotheses of a family");
  std::vector<std::string> require;
  v->add_option("family", family, "Family config (JSON)")->required();
  v->add_option("--require", require, "Flags that must hold (default: all)");
  v->callback([&] {
    run.command = "validate";
    body = [&] { return cmd_validate(run, family, require); };
  });

  auto* fc = app.add_subcommand("find-critical", "Critical Gamma-equivalent tilting");
  std::string gamma, direction, theta_bar;
  fc->add_option("family", family, "Family config (JSON)")->required();
  fc->add_option("--gamma", gamma, "Gamma rows, e.g. \"1 1\" or \"1 0; 0 1\"; omit to solve for the direction only");
  fc->add_option("--direction", direction, "Direction X (default: uniform)");
  fc->add_option("--theta-bar", theta_bar, "Reference tilt (default: 0)");
  fc->callback([&] {
    run.command = "find-critical";
    body = [&] { return cmd_find_critical(run, family, gamma, direction, theta_bar); };
  });

  auto* bd = app.add_subcommand("boundary", "Trace the boundary of chi(R^2)");
  int points = 50;
  double margin = 1e-3;
  bool full_range = false, caption = false;
  bd->add_option("family", family, "Family config (JSON)")->required();
  bd->add_option("--points", points, "Number of boundary points")->capture_default_str();
  bd->add_option("--margin", margin, "Distance kept from the ends of the direction interval")->capture_default_str();
  bd->add_flag("--full-range", full_range, "Grid all of (margin, 1 - margin) without locating the admissible range");
  bd->add_flag("--caption", caption, "Compare with the closed-form curve of the two-type example family");
  bd->callback([&] {
    run.command = "boundary";
    body = [&] { return cmd_boundary(run, family, points, margin, full_range, caption); };
  });

  SampleArgs sa;
  auto add_sampling = [&](CLI::App* c) {
    c->add_option("family", sa.family, "Family config (JSON)")->required();
    c->add_option("--root", sa.root, "Root type (1-based)")->capture_default_str();
    c->add_option("--samples", sa.samples, "Number of samples")->required();
    c->add_option("--seed", sa.seed, "Random seed")->required();
    c->add_option("--cap", sa.cap, "Max vertices per tree")->capture_default_str();
  };

  auto* sm = app.add_subcommand("sample", "Sample trees, optionally conditioned on Gamma N = g");
  add_sampling(sm);
  sm->add_option("--gamma", sa.gamma, "Gamma rows");
  sm->add_option("--g", sa.g, "Target, e.g. \"20\"");
  sm->add_option("--attempts", sa.attempts, "Max rejection trials")->capture_default_str();
  sm->callback([&] {
    run.command = "sample";
    body = [&] { return cmd_sample(run, sa); };
  });

  auto* ks = app.add_subcommand("kesten", "Sample Kesten tree prefixes of a critical family");
  int depth = 0, kr = -1;
  add_sampling(ks);
  ks->add_option("--depth", depth, "Generations to draw")->required();
  ks->add_option("--r", kr, "Also report the law of balls of this radius");
  ks->callback([&] {
    run.command = "kesten";
    body = [&] { return cmd_kesten(run, sa, depth, kr); };
  });

  auto* ll = app.add_subcommand("locallimit", "Conditioned ball laws vs the Kesten ball law");
  std::vector<std::string> targets;
  int lr = 2;
  add_sampling(ll);
  ll->add_option("--gamma", sa.gamma, "Gamma rows")->required();
  ll->add_option("--g", targets, "Targets, one per rung (repeatable)")->required();
  ll->add_option("--r", lr, "Ball radius")->capture_default_str();
  ll->add_option("--direction", direction, "Direction X for the solver (default: uniform)");
  ll->add_option("--theta-bar", theta_bar, "Reference tilt (default: 0)");
  ll->add_option("--attempts", sa.attempts, "Max rejection trials per rung")->capture_default_str();
  ll->callback([&] {
    run.command = "locallimit";
    body = [&] { return cmd_locallimit(run, sa, targets, lr, direction, theta_bar); };
  });

  auto* ap = app.add_subcommand("appendix", "Worked counterexamples");
  ap->require_subcommand(1);
  auto* apa = ap->add_subcommand("a", "Scan of the non-entire two-type family");
  std::optional<double> A, eps;
  std::vector<double> s_values{10, 20, 40};
  int curve_points = 4000;
  apa->add_option("--A", A, "Parameter A (default: grid 5, 10, 20)");
  apa->add_option("--eps", eps, "Perturbation size (default: grid 1e-3, 1e-2)");
  apa->add_option("--s", s_values, "Ladder of s values")->capture_default_str();
  apa->add_option("--curve-points", curve_points, "Critical-curve resolution")->capture_default_str();
  apa->callback([&] {
    run.command = "appendix a";
    body = [&] { return cmd_appendix_a(run, A, eps, s_values, curve_points); };
  });
  auto* apb = ap->add_subcommand("b", "Preimages of chi = 0 for the 2N-type family");
  int N = 3;
  apb->add_option("--N", N, "Half the number of types (>= 3)")->required();
  apb->callback([&] {
    run.command = "appendix b";
    body = [&] { return cmd_appendix_b(run, N); };
  });

  auto* rp = app.add_subcommand("replay", "Rerun the command recorded in a manifest");
  std::string manifest;
  rp->add_option("manifest", manifest, "Manifest JSON")->required();
  rp->callback([&] {
    run.command = "replay";
    body = [&] { return dispatch(replay_args(manifest, run.out_dir == "." ? "" : run.out_dir), out, err); };
  });

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }
  if (run.command == "replay") return body();
  return execute(run, body);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const SolverDivergence& e) {
    err << "solver divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const ConvergenceError& e) {
    err << "no convergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const NegativeScaleError& e) {
    err << e.what() << "\n";
    return kPropertyFailed;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kInputError;
  } catch (const BudgetError& e) {
    err << "budget exceeded: " << e.what() << "\n";
    return kInputError;
  } catch (const nlohmann::json::exception& e) {
    err << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kPropertyFailed;
  }
}

}  // namespace bgwtilt::cli
