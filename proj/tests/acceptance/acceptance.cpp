// One test per acceptance criterion; prints a PASS/FAIL line for each.

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "bgwtilt/casebook.hpp"
#include "bgwtilt/chi.hpp"
#include "bgwtilt/family_io.hpp"
#include "bgwtilt/sampling.hpp"
#include "bgwtilt/spectral.hpp"
#include "cli.hpp"
#include "corpus.hpp"
#include "enum_oracle.hpp"

using namespace bgwtilt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::map<std::string, std::string> g_summary;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

void note(const std::string& s) {
  g_summary[::testing::UnitTest::GetInstance()->current_test_info()->name()] = s;
}

class CriterionLines : public ::testing::EmptyTestEventListener {
  void OnTestEnd(const ::testing::TestInfo& info) override {
    const std::string name = info.name();
    std::cout << (info.result()->Passed() ? "PASS" : "FAIL") << "  criterion " << name.substr(9) << "  "
              << g_summary[name] << std::endl;
  }
};

const fs::path kReports = "acceptance_reports";
const std::uint64_t kSeed = 20240915;

Vec fig1_theta_star() {
  return find_critical_equivalent(fig1_family().projected, GammaConstraint::parse("1 1"), Vec::Zero(2),
                                  Vec::Constant(2, 0.5))
      .theta_star;
}

// Ordered family tilted by direct reweighting of its words.
OrderedFamily oracle_tilt(const OrderedFamily& z, const Vec& theta) {
  std::vector<OrderedFamily::Law> laws;
  for (int i = 0; i < z.types(); ++i) {
    OrderedFamily::Law law;
    double total = 0;
    for (const auto& [w, p] : z.law(i)) {
      double e = 0;
      for (int t : w) e += theta[t];
      law.emplace_back(w, p * std::exp(e));
      total += p * std::exp(e);
    }
    for (auto& [w, p] : law) p /= total;
    laws.push_back(std::move(law));
  }
  return OrderedFamily(z.types(), std::move(laws));
}

// Caption curve of the two-type example, written out independently.
Vec caption_point(double s) {
  const double e = std::exp(s);
  return (Vec(2) << 2 * s - 2 * std::log(1 - 2 * e) + std::log(1 - e) - std::log(3.0) - std::log(1 + e),
          std::log(1 - 2 * e * e * (1 + e)) - std::log(3.0) - 2 * s)
      .finished();
}

double caption_distance(const Vec& c) {
  // s = -ln 2 - exp(v); coarse grid in v, then golden section.
  auto dist = [&](double v) { return (caption_point(-std::log(2.0) - std::exp(v)) - c).norm(); };
  const int n = 40000;
  double best = 1e300, bv = 0;
  for (int i = 0; i <= n; ++i) {
    const double v = -30 + 36.0 * i / n;
    const double d = dist(v);
    if (std::isfinite(d) && d < best) {
      best = d;
      bv = v;
    }
  }
  double a = bv - 36.0 / n, b = bv + 36.0 / n;
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 200; ++it) {
    const double x = b - g * (b - a), y = a + g * (b - a);
    const double dx = dist(x), dy = dist(y);
    if (!(dx >= dy)) b = y; else a = x;
  }
  return std::min(best, dist(0.5 * (a + b)));
}

double g_series(double theta) {
  double s = 0;
  for (int n = 3;; ++n) {
    const double term = 2 * std::exp(n * theta) / (double(n) * (n - 1) * (n - 2));
    s += term;
    if (term < 1e-22 * std::max(1.0, s)) break;
  }
  return s;
}

double g_prime_series(double theta) {
  double s = 0;
  for (int n = 3;; ++n) {
    const double term = 2 * std::exp(n * theta) / (double(n - 1) * (n - 2));
    s += term;
    if (term < 1e-22 * std::max(1.0, s)) break;
  }
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Blob check on the critical tilt; writes its report and returns it.
BlobReport blob_report(const fs::path& dir, int threads) {
  const OrderedFamily z = tilt_ordered(fig1_family().ordered, fig1_theta_star());
  const BlobReport r = blob_expectation_check(z, 100'000, kSeed, 1'000'000, threads);
  fs::create_directories(dir);
  std::ofstream out(dir / "blob.csv", std::ios::binary);
  char buf[256];
  out << "type,estimate,standard_error,expected,z\n";
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", row.type + 1, row.estimate, row.standard_error,
                  row.expected, row.z);
    out << buf;
  }
  out << "# samples " << r.samples << " overflows " << r.overflows << "\n";
  return r;
}

int locallimit_report(const fs::path& dir, int threads) {
  std::ostringstream out, err;
  return cli::run({"locallimit", BGWTILT_CONFIG_DIR "/fig1.json", "--gamma", "1 1", "--g", "20", "--g", "40", "--g",
                   "80", "--r", "2", "--samples", "10000", "--seed", std::to_string(kSeed), "--threads",
                   std::to_string(threads), "--out-dir", dir.string()},
                  out, err);
}

}  // namespace

TEST(Acceptance, Criterion01) {
  auto fams = corpus::finite_families();
  for (const char* f : {"fig1", "critical2", "binary_critical", "one_child", "appendix_b_n3"})
    fams.emplace_back(f, load_family(std::string(BGWTILT_CONFIG_DIR "/") + f + ".json").projected.finite());
  double worst = 0;
  for (const auto& [name, mu] : fams) {
    const double e = chi(mu, Vec::Zero(mu.types())).cwiseAbs().maxCoeff();
    worst = std::max(worst, e);
    EXPECT_LE(e, 1e-14) << name;
  }
  EXPECT_GE(fams.size(), 10u);
  note("chi(0) = 0 on " + std::to_string(fams.size()) + " finite families, max |chi(0)| = " + fmt(worst));
}

TEST(Acceptance, Criterion02) {
  std::mt19937_64 gen(kSeed);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  const std::vector<std::pair<std::string, FiniteFamily>> fams{
      {"fig1", corpus::fig1()}, {"b3", project(to_double(appendix_b_family(3)))}};
  for (const auto& [name, mu] : fams) {
    const int k = mu.types();
    for (int trial = 0; trial < 100; ++trial) {
      Vec t(k);
      for (auto& x : t) x = u(gen);
      const Mat expected = corpus::oracle_mean(mu, t) - Mat::Identity(k, k);
      const double h = 1e-6;
      for (int c = 0; c < k; ++c) {
        Vec a = t, b = t;
        a[c] += h;
        b[c] -= h;
        const Vec col = (chi(mu, a) - chi(mu, b)) / (2 * h);
        worst = std::max(worst, (col - expected.col(c)).cwiseAbs().maxCoeff());
      }
    }
  }
  EXPECT_LE(worst, 1e-6);
  note("finite-difference Jacobian vs M - I at 200 random tilts, max gap " + fmt(worst));
}

TEST(Acceptance, Criterion03) {
  const ProjectedFamily mu = fig1_family().projected;
  const double rho = spectral_radius(mean_matrix(mu));
  EXPECT_NEAR(rho, 4.0 / 3.0, 1e-10);
  const CriticalSolveResult r =
      find_critical_equivalent(mu, GammaConstraint::parse("1 1"), Vec::Zero(2), Vec::Constant(2, 0.5));
  const double rho_gap = std::abs(corpus::rho2(corpus::oracle_mean(corpus::fig1(), r.theta_star)) - 1);
  const Vec c = corpus::oracle_chi(corpus::fig1(), r.theta_star);
  const double resid = std::abs(c[0] - c[1]) / std::sqrt(2.0);  // kernel of (1 1) is (1, -1)/sqrt 2
  EXPECT_LE(rho_gap, 1e-8);
  EXPECT_LE(resid, 1e-8);
  note("rho = " + fmt(rho) + "; theta* = (" + fmt(r.theta_star[0]) + ", " + fmt(r.theta_star[1]) +
       "), |rho - 1| = " + fmt(rho_gap) + ", equivalence residual " + fmt(resid));
}

TEST(Acceptance, Criterion04) {
  const FiniteFamily mu = corpus::fig1();
  const TiltVector q = subcritical_companion(mu);
  const double chi_norm = corpus::oracle_chi(mu, q).cwiseAbs().maxCoeff();
  const Vec p = q.array().exp();
  double fp = 0;
  for (int i = 0; i < 2; ++i) {
    double s = 0;
    for (const auto& [c, w] : mu.law(i)) s += w * std::pow(p[0], c[0]) * std::pow(p[1], c[1]);
    fp = std::max(fp, std::abs(p[i] - s));
  }
  const Criticality cl = classify(tilt(mu, q));
  EXPECT_LE(chi_norm, 1e-10);
  EXPECT_LE(fp, 1e-13);
  EXPECT_NE(cl.label, CriticalityLabel::Supercritical);
  EXPECT_LT(corpus::rho2(corpus::oracle_mean(mu, q)), 1.0);
  note("|chi(q)| = " + fmt(chi_norm) + ", |p - phi(p)| = " + fmt(fp) + ", mu_q " + to_string(cl.label) +
       " (rho " + fmt(cl.rho) + ")");
}

TEST(Acceptance, Criterion05) {
  const OrderedFamily z = fig1_family().ordered;
  const OrderedFamily zq = oracle_tilt(z, subcritical_companion(fig1_family().projected));
  double worst = 0;
  int targets = 0;
  std::size_t trees = 0;
  for (int root = 0; root < 2; ++root) {
    const auto ta = oracle::enumerate(z, root, 10);
    const auto tb = oracle::enumerate(zq, root, 10);
    trees += ta.size();
    const auto la = oracle::conditional(ta, {{1, 1}}, 2);
    const auto lb = oracle::conditional(tb, {{1, 1}}, 2);
    EXPECT_EQ(la.size(), lb.size());
    for (const auto& [g, law] : la) {
      ++targets;
      const auto& other = lb.at(g);
      double tv = 0;
      for (const auto& [sig, p] : law) {
        auto it = other.find(sig);
        tv += std::abs(p - (it == other.end() ? 0.0 : it->second));
      }
      for (const auto& [sig, p] : other)
        if (!law.count(sig)) tv += p;
      worst = std::max(worst, 0.5 * tv);
    }
  }
  EXPECT_LE(worst, 1e-9);
  note("fig1 vs q-companion conditional laws, " + std::to_string(trees) + " trees, " + std::to_string(targets) +
       " (root, g) targets, max TV " + fmt(worst));
}

TEST(Acceptance, Criterion06) {
  const BlobReport r = blob_report(kReports / "run1", 1);
  const Mat m = corpus::oracle_mean(corpus::fig1(), fig1_theta_star());
  const double expected = (1 - m(0, 0)) / m(1, 0);  // a2 / a1 for the left 1-eigenvector
  ASSERT_EQ(r.rows.size(), 1u);
  const auto& row = r.rows[0];
  const double z = (row.estimate - expected) / row.standard_error;
  EXPECT_NEAR(row.expected, expected, 1e-8);
  EXPECT_LE(std::abs(z), 3.0);
  note("E[N_2] estimate " + fmt(row.estimate) + " +- " + fmt(row.standard_error) + " vs X(2)/X(1) = " +
       fmt(expected) + ", z = " + fmt(z) + " (" + std::to_string(r.samples) + " samples)");
}

TEST(Acceptance, Criterion07) {
  const ProjectedFamily f1 = fig1_family().projected;
  const OrderedFamily z1 = fig1_family().ordered;
  const Vec t2 = critical_for_direction(f1, (Vec(2) << 0.3, 0.7).finished()).theta_star;
  const std::vector<std::pair<std::string, OrderedFamily>> fams{
      {"binary_critical", canonical_words(corpus::binary_critical())},
      {"critical2", canonical_words(corpus::critical2())},
      {"cyclic3", canonical_words(corpus::cyclic3())},
      {"fig1 at theta*", tilt_ordered(z1, fig1_theta_star())},
      {"fig1 at X = (0.3, 0.7)", tilt_ordered(z1, t2)},
  };
  double worst = 0;
  for (const auto& [name, z] : fams) {
    const OrderedFamily hat = size_biased_law(z);
    for (int i = 0; i < hat.types(); ++i) {
      double s = 0;
      for (const auto& [w, p] : hat.law(i)) s += p;
      worst = std::max(worst, std::abs(s - 1));
    }
  }
  EXPECT_LE(worst, 1e-12);
  note("size-biased laws of 5 critical families, max |mass - 1| = " + fmt(worst));
}

TEST(Acceptance, Criterion08) {
  ASSERT_EQ(locallimit_report(kReports / "run1", 1), 0);
  const json r = json::parse(slurp(kReports / "run1" / "locallimit.json"));
  std::vector<double> tv;
  for (const auto& row : r["rows"]) tv.push_back(row["tv"].get<double>());
  ASSERT_EQ(tv.size(), 3u);
  EXPECT_LE(tv[1], tv[0]);
  EXPECT_LE(tv[2], tv[1]);
  EXPECT_LE(tv[2], 0.1);
  note("radius-2 ball TV at g = 20/40/80: " + fmt(tv[0]) + " / " + fmt(tv[1]) + " / " + fmt(tv[2]));
}

TEST(Acceptance, Criterion09) {
  const AppendixBResult r = appendix_b_preimages(3);
  const OrderedFamily z = to_double(appendix_b_family(3));
  double worst = 0, closest = 1e300;
  for (std::size_t i = 0; i < r.preimages.size(); ++i) {
    worst = std::max(worst, corpus::oracle_chi(z, r.preimages[i]).cwiseAbs().maxCoeff());
    for (std::size_t j = 0; j < i; ++j)
      closest = std::min(closest, (r.preimages[i] - r.preimages[j]).cwiseAbs().maxCoeff());
  }
  const double delta_err = std::abs(r.delta - (std::sqrt(5.0) - 2));
  EXPECT_EQ(r.preimages.size(), 20u);
  EXPECT_GT(closest, 1e-6);
  EXPECT_LE(worst, 1e-10);
  EXPECT_LE(delta_err, 1e-12);
  note(std::to_string(r.preimages.size()) + " distinct preimages (min separation " + fmt(closest) +
       "), max |chi| = " + fmt(worst) + ", |delta - (sqrt5 - 2)| = " + fmt(delta_err));
}

TEST(Acceptance, Criterion10) {
  double worst = 0, min_g = 1e300, max_gp = -1e300;
  for (int i = 0; i < 1000; ++i) {
    const double theta = -10 + (10 - 0.01) * i / 999.0;
    const double closed = g_closed(theta);
    worst = std::max(worst, std::abs(closed - g_series(theta)));
    min_g = std::min(min_g, closed);
    max_gp = std::max({max_gp, g_prime(theta), g_prime_series(theta)});
  }
  EXPECT_LE(worst, 1e-10);
  EXPECT_GE(min_g, 0.0);
  EXPECT_LE(max_gp, 2.0);

  const CriticalSolveResult control = find_critical_equivalent(
      appendix_a_family(10, 0), GammaConstraint::parse("6 1"), (Vec(2) << -10, 10).finished(), Vec::Constant(2, 0.5));
  EXPECT_LE(control.residuals.rho_gap, 1e-8);
  EXPECT_LE(control.residuals.equivalence_residual, 1e-8);
  const AppendixAReport scan = appendix_a_scan(10, 0.01);
  EXPECT_TRUE(scan.divergence_evidence);
  note("g closed vs series max gap " + fmt(worst) + ", min g " + fmt(min_g) + ", max g' " + fmt(max_gp) +
       "; eps = 0 control rho gap " + fmt(control.residuals.rho_gap) + "; scan evidence " +
       (scan.divergence_evidence ? "yes" : "no"));
}

TEST(Acceptance, Criterion11) {
  const ProjectedFamily mu = fig1_family().projected;
  const BoundaryTrace tr = trace_boundary(mu, 50);
  ASSERT_EQ(tr.points.size(), 50u);
  double gap = 0, convex = 0;
  for (const auto& p : tr.points) {
    gap = std::max(gap, caption_distance(p.chi));
    const Vec X = (Vec(2) << p.t, 1 - p.t).finished();
    for (const auto& q : tr.points) convex = std::max(convex, X.dot(p.chi) - X.dot(q.chi));
  }
  EXPECT_LE(gap, 1e-6);
  EXPECT_LE(convex, 1e-8);
  note("50 boundary points, max caption gap " + fmt(gap) + ", max supporting-line violation " + fmt(convex));
}

TEST(Acceptance, Criterion12) {
  const fs::path a = kReports / "run1", b = kReports / "run2";
  if (!fs::exists(a / "blob.csv")) blob_report(a, 1);
  if (!fs::exists(a / "locallimit.json")) ASSERT_EQ(locallimit_report(a, 1), 0);
  fs::remove_all(b);
  blob_report(b, 2);
  ASSERT_EQ(locallimit_report(b, 2), 0);
  int files = 0, same = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const std::string name = entry.path().filename().string();
    if (name.find("manifest") != std::string::npos) continue;
    ++files;
    if (fs::exists(b / name) && slurp(entry.path()) == slurp(b / name)) ++same;
    else ADD_FAILURE() << name << " differs between runs";
  }
  EXPECT_GE(files, 5);
  note(std::to_string(same) + "/" + std::to_string(files) +
       " report files bit-identical on rerun with the same seed (1 vs 2 threads)");
}

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  auto& listeners = ::testing::UnitTest::GetInstance()->listeners();
  listeners.Append(new CriterionLines);
  return RUN_ALL_TESTS();
}
