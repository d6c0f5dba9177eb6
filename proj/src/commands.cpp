#include "saan/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "saan/error.hpp"
#include "saan/io.hpp"

namespace saan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string data;
  std::string results;
  std::optional<std::uint64_t> seed;
  std::string method;
  bool quiet = false;
};

RunManifest load_manifest(const Options& opt) {
  if (opt.config.empty()) throw Error(Errc::InvalidConfig, "--config: required");
  std::ifstream in(opt.config);
  if (!in) throw Error(Errc::InvalidConfig, "--config: cannot open " + opt.config);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(Errc::InvalidConfig, opt.config + ": " + ex.what());
  }
  RunManifest m = manifest_from_json(j);
  if (opt.seed) m.experiment.seed = *opt.seed;
  if (!opt.method.empty()) m.experiment.method = MethodFlags::named(opt.method);
  return m;
}

// --out, then the environment, then the manifest.
std::string output_dir(const Options& opt, const RunManifest& m) {
  if (!opt.out.empty()) return opt.out;
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return m.output_dir;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_json_file(const fs::path& path, const json& j) { open_output(path) << j.dump(2) << '\n'; }

Dataset dataset_for(const Options& opt, const RunManifest& m) {
  if (opt.data.empty()) {
    return generate_synthetic(m.experiment.scenario, m.experiment.generator,
                              derive_seed(m.experiment.seed, 1));
  }
  std::ifstream in(opt.data);
  if (!in) throw Error(Errc::InvalidConfig, "--data: cannot open " + opt.data);
  Dataset d = read_dataset(in);
  if (d.input_dim != m.experiment.generator.input_dim) {
    throw Error(Errc::InvalidConfig, "--data: input_dim " + std::to_string(d.input_dim) +
                                         " differs from generator.input_dim");
  }
  return d;
}

std::string pct(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * v;
  return s.str();
}

int cmd_init_config(const Options& opt, std::ostream& out) {
  RunManifest m;
  m.experiment.method = MethodFlags::saan();
  if (opt.seed) m.experiment.seed = *opt.seed;
  if (!opt.method.empty()) m.experiment.method = MethodFlags::named(opt.method);
  if (opt.out.empty()) {
    out << manifest_to_json(m).dump(2) << '\n';
  } else {
    write_json_file(opt.out, manifest_to_json(m));
  }
  return kExitOk;
}

int cmd_gen_data(const Options& opt, std::ostream& out) {
  const RunManifest m = load_manifest(opt);
  const Dataset d = generate_synthetic(m.experiment.scenario, m.experiment.generator,
                                       derive_seed(m.experiment.seed, 1));
  fs::path path = opt.out.empty() ? fs::path(output_dir(opt, m)) / "dataset.csv" : fs::path(opt.out);
  auto file = open_output(path);
  write_dataset(file, d, manifest_hash(m));
  if (!opt.quiet) out << "wrote " << d.records.size() << " records to " << path.string() << '\n';
  return kExitOk;
}

int cmd_run(const Options& opt, std::ostream& out) {
  RunManifest m = load_manifest(opt);
  m.output_dir = output_dir(opt, m);
  const Dataset data = dataset_for(opt, m);
  const ExperimentResult r = run_experiment(m.experiment, &data);
  const fs::path dir = m.output_dir;
  const std::string hash = manifest_hash(m);

  write_json_file(dir / "manifest.json", manifest_to_json(m));
  {
    auto f = open_output(dir / "results.jsonl");
    write_results_jsonl(f, m, r);
  }
  {
    auto f = open_output(dir / "results.csv");
    write_results_csv(f, m, r);
  }
  write_json_file(dir / "checkpoint.json",
                  checkpoint_to_json(r.state, r.classifier, r.sessions.back().index,
                                     m.experiment.seed, hash));
  if (!opt.quiet) {
    out << "method " << m.experiment.method.name << "  manifest " << hash.substr(0, 12) << '\n';
    out << "session accuracy:";
    for (double a : r.metrics.per_session_accuracy) out << ' ' << pct(a);
    out << "\nlast " << pct(r.metrics.last_accuracy()) << "  drop " << pct(r.metrics.drop)
        << "  base " << pct(r.metrics.base_accuracy) << "  novel "
        << pct(r.metrics.novel_accuracy) << "  hm " << pct(r.metrics.harmonic_mean) << '\n';
  }
  return kExitOk;
}

int cmd_ablate(const Options& opt, std::ostream& out) {
  RunManifest m = load_manifest(opt);
  m.output_dir = output_dir(opt, m);
  const Dataset data = dataset_for(opt, m);
  std::vector<AblationRow> rows;
  for (const auto& flags : ablation_grid()) {
    ExperimentConfig cfg = m.experiment;
    MethodFlags row = flags;
    row.compression = m.experiment.method.compression;
    row.variance_floor = m.experiment.method.variance_floor;
    row.transform = m.experiment.method.transform;
    cfg.method = row;
    rows.push_back({row.name, run_experiment(cfg, &data).metrics});
  }
  const fs::path dir = m.output_dir;
  write_json_file(dir / "manifest.json", manifest_to_json(m));
  {
    auto f = open_output(dir / "ablation.jsonl");
    write_ablation_jsonl(f, m, rows);
  }
  {
    auto f = open_output(dir / "ablation.csv");
    write_ablation_csv(f, m, rows);
  }
  if (!opt.quiet) {
    const double ref = rows.front().metrics.last_accuracy();
    for (const auto& row : rows) {
      const double last = row.metrics.last_accuracy();
      out << std::left << std::setw(10) << row.method << " last " << pct(last) << "  delta "
          << (last >= ref ? "+" : "") << pct(last - ref) << '\n';
    }
  }
  return kExitOk;
}

int cmd_report(const Options& opt, std::ostream& out) {
  if (opt.results.empty()) throw Error(Errc::InvalidConfig, "--results: required");
  std::ifstream in(opt.results);
  if (!in) throw Error(Errc::InvalidConfig, "--results: cannot open " + opt.results);
  std::string expected;
  if (!opt.config.empty()) expected = manifest_hash(load_manifest(opt));
  const LoadedResults loaded = load_results(in, expected);
  if (opt.quiet) return kExitOk;
  out << "manifest " << loaded.manifest_hash << '\n';
  for (const auto& rec : loaded.records) {
    const std::string type = rec.value("type", "");
    if (type == "session") {
      out << "session " << rec["session"].get<int>() << "  classes " << rec["classes"].get<int>()
          << "  accuracy " << pct(rec["accuracy"].get<double>()) << '\n';
    } else if (type == "summary") {
      out << rec["method"].get<std::string>() << "  last " << pct(rec["last_accuracy"].get<double>())
          << "  drop " << pct(rec["drop"].get<double>()) << '\n';
    } else if (type == "ablation") {
      out << std::left << std::setw(10) << rec["method"].get<std::string>() << " last "
          << pct(rec["last_accuracy"].get<double>()) << "  delta "
          << pct(rec["delta_last_accuracy"].get<double>()) << '\n';
    }
  }
  return kExitOk;
}

int exit_code_for(Errc code) {
  if (is_numeric(code)) return kExitNumeric;
  switch (code) {
    case Errc::InvalidConfig:
    case Errc::ClassBudgetExceeded:
    case Errc::TooManyClasses:
    case Errc::InvalidDimension:
    case Errc::Format:
    case Errc::ManifestMismatch:
      return kExitConfig;
    default:
      return kExitFailure;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot class-incremental learning with space allocation and angle-norm joint "
               "classification",
               "saan"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Run manifest (JSON)");
    sub->add_option("--out", opt.out, "Output path or directory");
    sub->add_option("--seed", seed, "Override the manifest seed");
    sub->add_option("--method", opt.method, "Override the method (baseline, saan or an ablation row)");
    sub->add_flag("--quiet", opt.quiet, "Suppress the summary on stdout");
  };
  auto* init = app.add_subcommand("init-config", "Write a default manifest");
  common(init);
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset of a manifest");
  common(gen);
  auto* run = app.add_subcommand("run", "Train and evaluate one method");
  common(run);
  run->add_option("--data", opt.data, "Use a saved dataset instead of generating one");
  auto* ablate = app.add_subcommand("ablate", "Run the six-row ablation grid");
  common(ablate);
  ablate->add_option("--data", opt.data, "Use a saved dataset instead of generating one");
  auto* report = app.add_subcommand("report", "Check and summarize a results file");
  report->add_option("--results", opt.results, "results.jsonl or ablation.jsonl")->required();
  report->add_option("--config", opt.config, "Manifest the results must belong to");
  report->add_flag("--quiet", opt.quiet, "Only validate");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "saan: " << e.what() << '\n';
    return kExitConfig;
  }
  for (auto* sub : app.get_subcommands()) {
    const auto* option = sub->get_option_no_throw("--seed");
    if (option != nullptr && option->count() > 0) opt.seed = seed;
  }

  try {
    if (init->parsed()) return cmd_init_config(opt, out);
    if (gen->parsed()) return cmd_gen_data(opt, out);
    if (run->parsed()) return cmd_run(opt, out);
    if (ablate->parsed()) return cmd_ablate(opt, out);
    return cmd_report(opt, out);
  } catch (const Error& e) {
    err << "saan: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "saan: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace saan
