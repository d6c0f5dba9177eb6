// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "saan/anj_classifier.hpp"
#include "saan/ccsa_loss.hpp"
#include "saan/center_allocator.hpp"
#include "saan/commands.hpp"
#include "saan/harness.hpp"
#include "saan/io.hpp"
#include "saan/reference_model.hpp"
#include "support.hpp"

using namespace saan;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr int kGradientConfigs = 100;
constexpr double kFdStep = 1e-6;
constexpr double kLossLevelRel = 1e-4;
constexpr double kEndToEndRel = 1e-3;
constexpr double kGradientSeconds = 10.0;
constexpr int kPerpendicularCases = 1000;
constexpr double kPerpendicularTol = 1e-10;
constexpr int kHungarianMatrices = 200;
constexpr int kHungarianMaxN = 7;
constexpr double kHungarianSeconds = 5.0;
constexpr int kMomentumCases = 1000;
constexpr double kMomentumTol = 1e-10;
constexpr double kTailTol = 1e-7;
constexpr double kTailRange = 8.0;
constexpr int kReductionCases = 1000;
constexpr double kBenchmarkMargin = 0.03;
constexpr double kBenchmarkSeconds = 120.0;
constexpr std::uint64_t kBenchmarkSeeds[] = {1, 2, 3, 4, 5};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << "  " << id << "  " << name << "  " << detail
            << std::endl;
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

CenterBank random_bank(std::mt19937_64& rng, int d, int classes) {
  std::map<ClassLabel, Vector> means;
  for (int c = 0; c < classes; ++c) means.emplace(ClassLabel(c), test::random_vector(rng, d));
  return assign_base_session(generate_orthonormal_centers(d, rng()), means);
}

std::vector<LabeledEmbedding> random_batch(std::mt19937_64& rng, int d, int classes, int m) {
  std::uniform_int_distribution<int> label(0, classes - 1);
  std::vector<LabeledEmbedding> batch;
  for (int i = 0; i < m; ++i) batch.push_back({test::random_vector(rng, d, 2.0), ClassLabel(label(rng))});
  return batch;
}

// Largest relative error over one parameter block of the full model loss.
template <typename Block>
double block_error(const std::vector<LabeledInput>& batch, Model& model, Block& param,
                   const Block& analytic, const CenterBank& bank, const CenterTerms& terms) {
  Block fd = analytic;
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double keep = param.data()[i];
    param.data()[i] = keep + kFdStep;
    const double up = total_loss(batch, model, &bank, terms);
    param.data()[i] = keep - kFdStep;
    const double down = total_loss(batch, model, &bank, terms);
    param.data()[i] = keep;
    fd.data()[i] = (up - down) / (2.0 * kFdStep);
  }
  const double scale = std::max({analytic.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff(), 1e-8});
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

void gradient_fidelity() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> weight(0.1, 3.0);
  double worst_loss = 0.0, worst_model = 0.0;
  for (int cfg = 0; cfg < kGradientConfigs; ++cfg) {
    const int d = cfg % 2 == 0 ? 4 : 16;
    std::uniform_int_distribution<int> classes_dist(2, d), m_dist(1, 8);
    const int classes = classes_dist(rng);
    const LossWeights w{weight(rng), weight(rng)};
    const CenterBank bank = random_bank(rng, d, classes);

    // Loss level: alpha L1 + beta L2 with respect to each embedding.
    const auto batch = random_batch(rng, d, classes, m_dist(rng));
    const int m = static_cast<int>(batch.size());
    for (int i = 0; i < m; ++i) {
      auto f = [&](const Vector& e) {
        auto b = batch;
        b[i].embedding = e;
        return center_loss(b, bank, w, true).weighted_total;
      };
      const Vector fd = test::central_difference(f, batch[i].embedding, kFdStep);
      const Vector an = -w.alpha * grad_l1_embedding(batch[i].embedding, bank.center_of(batch[i].label), m) +
                        w.beta * grad_l2_embedding(batch[i].embedding, bank, batch[i].label, m);
      worst_loss = std::max(worst_loss, test::relative_error(an, fd));
    }

    // End to end: cross-entropy plus both center terms through the network.
    const int input = 6, hidden = 8;
    Model model = init_model(input, hidden, d, rng());
    std::vector<ClassLabel> labels;
    for (int c = 0; c < classes; ++c) labels.emplace_back(c);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix cols(d, classes);
    for (Eigen::Index k = 0; k < cols.size(); ++k) cols.data()[k] = n(rng);
    model.head.expand(labels, cols);
    model.extractor.b1 = test::random_vector(rng, hidden, 0.3);
    model.extractor.b2 = test::random_vector(rng, d, 0.3);
    std::uniform_int_distribution<int> label(0, classes - 1);
    std::vector<LabeledInput> inputs;
    for (int i = 0, count = m_dist(rng); i < count; ++i) {
      inputs.push_back({test::random_vector(rng, input, 1.5), ClassLabel(label(rng))});
    }
    const CenterTerms terms{w, true};
    const auto g = backprop_step(inputs, model, &bank, terms).gradients;
    auto& f = model.extractor;
    worst_model = std::max({worst_model, block_error(inputs, model, f.w1, *g.w1, bank, terms),
                            block_error(inputs, model, f.b1, *g.b1, bank, terms),
                            block_error(inputs, model, f.w2, *g.w2, bank, terms),
                            block_error(inputs, model, f.b2, *g.b2, bank, terms),
                            block_error(inputs, model, model.head.weight, *g.head, bank, terms)});
  }
  const double secs = seconds_since(start);
  report(1, "gradient fidelity",
         worst_loss <= kLossLevelRel && worst_model <= kEndToEndRel && secs < kGradientSeconds,
         fmt("loss-level max rel %.2e (<= 1e-4), end-to-end max rel %.2e (<= 1e-3), %.2f s (< 10)",
             worst_loss, worst_model, secs));
}

void perpendicularity() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  int cases = 0;
  while (cases < kPerpendicularCases) {
    std::uniform_int_distribution<int> d_dist(2, 24);
    const int d = d_dist(rng);
    std::uniform_int_distribution<int> classes_dist(2, d);
    const int classes = classes_dist(rng);
    const CenterBank bank = random_bank(rng, d, classes);
    for (const auto& s : random_batch(rng, d, classes, 4)) {
      const Vector& e = s.embedding;
      const Vector g1 = grad_l1_embedding(e, bank.center_of(s.label), 4);
      const Vector g2 = grad_l2_embedding(e, bank, s.label, 4);
      for (const Vector& v : {g1, g2, Vector(-2.0 * g1 + 0.4 * g2)}) {
        const double denom = v.norm() * e.norm();
        if (denom > 0.0) worst = std::max(worst, std::abs(v.dot(e)) / denom);
      }
      ++cases;
    }
  }
  report(2, "gradient perpendicularity", worst <= kPerpendicularTol,
         fmt("max |v.e|/(|v||e|) %.2e (<= 1e-10) over %.0f cases", worst, cases));
}

void hungarian() {
  const auto start = Clock::now();
  std::mt19937_64 rng(303);
  int mismatches = 0, checked = 0;
  for (int n = 1; n <= kHungarianMaxN; ++n) {
    for (int k = 0; k < kHungarianMatrices; ++k) {
      const Matrix cost = test::random_matrix(rng, n, n, -2.0, 2.0);
      const Assignment a = hungarian_assign(cost);
      std::vector<int> seen(n, 0);
      double total = 0.0;
      bool valid = static_cast<int>(a.column_of_row.size()) == n;
      for (int i = 0; valid && i < n; ++i) {
        const int j = a.column_of_row[i];
        valid = j >= 0 && j < n && seen[j]++ == 0;
        if (valid) total += cost(i, j);
      }
      if (!valid || total != test::brute_force_min_cost(cost)) ++mismatches;
      ++checked;
    }
  }
  const double secs = seconds_since(start);
  report(3, "hungarian optimality", mismatches == 0 && secs < kHungarianSeconds,
         fmt("%.0f mismatches over %.0f matrices (n = 1..7), %.2f s (< 5)", mismatches, checked, secs));
}

void center_update_equivalence() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  std::uniform_real_distribution<double> eta_dist(0.0, 2.0);
  for (int t = 0; t < kMomentumCases; ++t) {
    std::uniform_int_distribution<int> d_dist(2, 20), m_dist(1, 10);
    const int d = d_dist(rng);
    const int m = m_dist(rng);
    std::uniform_int_distribution<int> same_dist(1, m);
    const Vector c = normalize(test::random_vector(rng, d));
    std::vector<Vector> same;
    for (int i = 0, k = same_dist(rng); i < k; ++i) same.push_back(test::random_vector(rng, d, 3.0));
    const double eta = eta_dist(rng);

    // L1 restricted to this class as a function of a free center:
    // (1/m) sum (1 - <e_i/|e_i|, c>). Linear in c, so a central difference
    // with any step recovers the gradient up to rounding.
    auto f = [&](const Vector& center) {
      double s = 0.0;
      for (const auto& e : same) s += 1.0 - (e / e.norm()).dot(center);
      return s / m;
    };
    const Vector grad = test::central_difference(f, c, 0.5);
    const Vector gd = c - eta * grad;
    const Vector expected = gd / gd.norm();
    const Vector got = center_momentum_update(c, same, m, eta);
    worst = std::max(worst, (got - expected).cwiseAbs().maxCoeff());
  }
  report(4, "center update equivalence", worst <= kMomentumTol,
         fmt("max abs diff %.2e (<= 1e-10) over %.0f cases", worst, kMomentumCases));
}

void tail_accuracy() {
  double worst = 0.0;
  int points = 0;
  const double mus[] = {0.0, 1.3, -2.0};
  const double sigmas[] = {1.0, 0.05, 4.0};
  for (int p = 0; p < 3; ++p) {
    for (int k = -800; k <= 800; ++k) {
      const double z = kTailRange * k / 800.0;
      const double x = mus[p] + z * sigmas[p];
      worst = std::max(worst, std::abs(normal_tail(x, mus[p], sigmas[p]) - test::upper_tail_series(z)));
      ++points;
    }
  }
  report(5, "normal_tail accuracy", worst <= kTailTol,
         fmt("max abs error %.2e (<= 1e-7) over %.0f points in +-8 sd", worst, points));
}

void compression_zero() {
  std::mt19937_64 rng(505);
  int disagreements = 0;
  std::uniform_int_distribution<int> d_dist(2, 12), base_dist(1, 6), inc_dist(0, 5), n_dist(1, 6);
  std::uniform_real_distribution<double> scale(0.1, 5.0);
  for (int t = 0; t < kReductionCases; ++t) {
    const int d = d_dist(rng);
    const int base = base_dist(rng), inc = inc_dist(rng);
    SamplesByClass samples, base_samples, inc_samples;
    std::map<ClassLabel, SessionIndex> session_of;
    for (int c = 0; c < base + inc; ++c) {
      const ClassLabel label(c);
      const Vector dir = test::random_vector(rng, d);
      for (int i = 0, n = n_dist(rng); i < n; ++i) {
        samples[label].push_back(scale(rng) * (dir + 0.5 * test::random_vector(rng, d)));
      }
      session_of[label] = c < base ? 0 : 1 + (c - base) % 2;
      (c < base ? base_samples : inc_samples)[label] = samples[label];
    }
    const RepresentativeSet reps = two_stage_fit(samples, session_of);
    const NormModel norm = fit_norm_model(base_samples, inc_samples, 1e-4);
    const Vector query = scale(rng) * test::random_vector(rng, d);
    if (joint_predict(query, reps, norm, 0.0).first != ncm_predict(query, reps)) ++disagreements;
  }
  report(6, "C=0 reduction", disagreements == 0,
         fmt("%.0f disagreements over %.0f cases", disagreements, kReductionCases));
}

struct Means {
  double last = 0.0;
  double drop = 0.0;
};

Means mean_over_seeds(const std::string& method) {
  Means m;
  for (std::uint64_t seed : kBenchmarkSeeds) {
    ExperimentConfig cfg;
    cfg.method = MethodFlags::named(method);
    cfg.seed = seed;
    const auto r = run_experiment(cfg);
    m.last += r.metrics.last_accuracy();
    m.drop += r.metrics.drop;
  }
  const double n = static_cast<double>(std::size(kBenchmarkSeeds));
  return {m.last / n, m.drop / n};
}

void benchmark_and_ablation() {
  const auto start = Clock::now();
  const Means baseline = mean_over_seeds("baseline");
  const Means saan = mean_over_seeds("saan");
  const double secs = seconds_since(start);
  report(7, "mechanism benchmark",
         saan.last - baseline.last >= kBenchmarkMargin && saan.drop < baseline.drop &&
             secs < kBenchmarkSeconds,
         fmt("last %.4f vs baseline %.4f (delta %+.4f, >= 0.03); drop %.4f", saan.last,
             baseline.last, saan.last - baseline.last, saan.drop) +
             fmt(" (baseline %.4f); %.1f s (< 120)", baseline.drop, secs));

  const Means l1 = mean_over_seeds("l1");
  const Means angle_only = mean_over_seeds("l1_l2");
  const Means with_nd = mean_over_seeds("l1_l2_nd");
  report(8, "ablation ordering", l1.last > baseline.last && with_nd.last > angle_only.last,
         fmt("l1 - baseline %+.4f (> 0); l1_l2_nd - l1_l2 %+.4f (> 0)", l1.last - baseline.last,
             with_nd.last - angle_only.last));
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), dir).string()] = slurp(entry.path());
  }
  return files;
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "saan_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ostringstream out, err;
  const std::string config = (root / "manifest.json").string();
  const std::string target = (root / "out").string();
  bool ok = run_cli({"init-config", "--out", config}, out, err) == kExitOk;
  std::map<std::string, std::string> runs[2];
  for (auto& files : runs) {
    ok = ok && run_cli({"gen-data", "--config", config, "--out", target + "/dataset.csv", "--quiet"},
                       out, err) == kExitOk;
    ok = ok && run_cli({"run", "--config", config, "--out", target, "--quiet"}, out, err) == kExitOk;
    ok = ok && run_cli({"ablate", "--config", config, "--out", target + "/ablation", "--quiet"}, out,
                       err) == kExitOk;
    if (ok) files = snapshot(target);
    fs::remove_all(target);
  }
  int differing = 0;
  for (const auto& [name, bytes] : runs[0]) {
    const auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != bytes) ++differing;
  }
  const bool same_set = runs[0].size() == runs[1].size();
  fs::remove_all(root);
  report(9, "determinism", ok && !runs[0].empty() && same_set && differing == 0,
         ok ? fmt("%.0f of %.0f result files differ between reruns", differing, runs[0].size())
            : "a command failed: " + err.str());
}

}  // namespace

int main() {
  gradient_fidelity();
  perpendicularity();
  hungarian();
  center_update_equivalence();
  tail_accuracy();
  compression_zero();
  benchmark_and_ablation();
  determinism();
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
