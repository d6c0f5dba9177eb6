#include "saan/io.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <openssl/sha.h>

#include "saan/error.hpp"

namespace saan {

using nlohmann::json;

std::string format_double(double value) {
  if (!std::isfinite(value)) throw Error(Errc::NonFinite, "cannot format a non-finite value");
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw Error(Errc::Format, "double formatting failed");
  return std::string(buf, end);
}

double parse_double(const std::string& text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw Error(Errc::Format, "bad number '" + text + "'");
  return value;
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

int parse_int(const std::string& text) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(Errc::Format, "bad integer '" + text + "'");
  }
  return value;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data, const std::string& manifest_hash) {
  out << "# saan-dataset input_dim=" << data.input_dim << " manifest_hash=" << manifest_hash << '\n';
  out << "session,label,split";
  for (int i = 0; i < data.input_dim; ++i) out << ",x" << i;
  out << '\n';
  for (const auto& r : data.records) {
    if (r.x.size() != data.input_dim) {
      throw Error(Errc::DimensionMismatch, "record width differs from input_dim");
    }
    out << r.session << ',' << r.label.id << ',' << (r.split == Split::Train ? "train" : "test");
    for (Eigen::Index i = 0; i < r.x.size(); ++i) out << ',' << format_double(r.x(i));
    out << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  Dataset data;
  std::string line;
  bool have_header = false;
  int declared_dim = -1;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (declared_dim < 0) {
      const std::string magic = "# saan-dataset input_dim=";
      if (line.rfind(magic, 0) != 0) {
        throw Error(Errc::Format, "line " + std::to_string(lineno) + ": expected '" + magic + "'");
      }
      const std::string rest = line.substr(magic.size());
      declared_dim = parse_int(rest.substr(0, rest.find(' ')));
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_commas(line);
    if (!have_header) {
      if (cells.size() < 4 || cells[0] != "session" || cells[1] != "label" || cells[2] != "split") {
        throw Error(Errc::Format, "line " + std::to_string(lineno) + ": expected header");
      }
      data.input_dim = static_cast<int>(cells.size()) - 3;
      for (int i = 0; i < data.input_dim; ++i) {
        if (cells[3 + i] != "x" + std::to_string(i)) {
          throw Error(Errc::Format, "line " + std::to_string(lineno) + ": bad column " + cells[3 + i]);
        }
      }
      if (data.input_dim != declared_dim) {
        throw Error(Errc::Format, "line " + std::to_string(lineno) + ": " +
                                      std::to_string(data.input_dim) + " columns, input_dim=" +
                                      std::to_string(declared_dim));
      }
      have_header = true;
      continue;
    }
    if (static_cast<int>(cells.size()) != data.input_dim + 3) {
      throw Error(Errc::Format, "line " + std::to_string(lineno) + ": expected " +
                                    std::to_string(data.input_dim + 3) + " fields");
    }
    DataRecord r;
    r.session = parse_int(cells[0]);
    r.label = ClassLabel(parse_int(cells[1]));
    if (cells[2] == "train") {
      r.split = Split::Train;
    } else if (cells[2] == "test") {
      r.split = Split::Test;
    } else {
      throw Error(Errc::Format, "line " + std::to_string(lineno) + ": bad split " + cells[2]);
    }
    r.x.resize(data.input_dim);
    for (int i = 0; i < data.input_dim; ++i) r.x(i) = parse_double(cells[3 + i]);
    data.records.push_back(std::move(r));
  }
  if (!have_header) throw Error(Errc::Format, "dataset has no header");
  return data;
}

// ---- manifest --------------------------------------------------------------

namespace {

// Reads an object field by field and complains about anything left over.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(Errc::InvalidConfig, where() + ": expected an object");
  }

  const json& field(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) throw Error(Errc::InvalidConfig, join(key) + ": missing field");
    seen_.insert(key);
    return *it;
  }

  template <typename T>
  T get(const std::string& key) {
    const json& v = field(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw Error(Errc::InvalidConfig, join(key) + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) {
          throw Error(Errc::InvalidConfig, join(key) + ": expected an integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw Error(Errc::InvalidConfig, join(key) + ": expected a number");
      } else {
        if (!v.is_string()) throw Error(Errc::InvalidConfig, join(key) + ": expected a string");
      }
      return v.get<T>();
    } catch (const json::exception&) {
      throw Error(Errc::InvalidConfig, join(key) + ": value out of range");
    }
  }

  StrictObject child(const std::string& key) { return StrictObject(field(key), join(key)); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw Error(Errc::InvalidConfig, join(key) + ": unknown field");
    }
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "manifest" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const char* mode_name(ScenarioMode m) {
  return m == ScenarioMode::Conventional ? "conventional" : "open_ended";
}

const char* transform_name(NormTransform t) { return t == NormTransform::Log ? "log" : "raw"; }

json method_to_json(const MethodFlags& m) {
  return {{"name", m.name},
          {"l1", m.l1},
          {"l2", m.l2},
          {"two_stage", m.two_stage},
          {"norm_dist", m.norm_dist},
          {"compression", m.compression},
          {"variance_floor", m.variance_floor},
          {"norm_transform", transform_name(m.transform)}};
}

MethodFlags method_from(StrictObject o) {
  MethodFlags m;
  m.name = o.get<std::string>("name");
  m.l1 = o.get<bool>("l1");
  m.l2 = o.get<bool>("l2");
  m.two_stage = o.get<bool>("two_stage");
  m.norm_dist = o.get<bool>("norm_dist");
  m.compression = o.get<double>("compression");
  m.variance_floor = o.get<double>("variance_floor");
  const auto t = o.get<std::string>("norm_transform");
  if (t == "log") {
    m.transform = NormTransform::Log;
  } else if (t == "raw") {
    m.transform = NormTransform::Raw;
  } else {
    throw Error(Errc::InvalidConfig, o.join("norm_transform") + ": expected \"log\" or \"raw\"");
  }
  if (!(m.compression >= 0.0)) throw Error(Errc::InvalidConfig, o.join("compression") + ": must be >= 0");
  if (!(m.variance_floor > 0.0)) {
    throw Error(Errc::InvalidConfig, o.join("variance_floor") + ": must be > 0");
  }
  o.finish();
  return m;
}

}  // namespace

json manifest_to_json(const RunManifest& manifest) {
  const auto& e = manifest.experiment;
  const auto& s = e.scenario;
  const auto& g = e.generator;
  const auto& t = e.train;
  return {
      {"tool_version", manifest.tool_version},
      {"seed", e.seed},
      {"embedding_dim", e.embedding_dim},
      {"scenario",
       {{"total_classes", s.total_classes},
        {"base_classes", s.base_classes},
        {"sessions", s.sessions},
        {"ways", s.ways},
        {"shots", s.shots},
        {"mode", mode_name(s.mode)},
        {"open_ended",
         {{"ways_mean", s.open_ended.ways_mean},
          {"ways_var", s.open_ended.ways_var},
          {"shots_mean", s.open_ended.shots_mean},
          {"shots_var", s.open_ended.shots_var}}}}},
      {"generator",
       {{"input_dim", g.input_dim},
        {"angular_noise", g.angular_noise},
        {"base_log_norm_center", g.base_log_norm_center},
        {"base_log_norm_gap", g.base_log_norm_gap},
        {"base_log_norm_sigma", g.base_log_norm_sigma},
        {"incremental_log_norm_mu", g.incremental_log_norm_mu},
        {"incremental_log_norm_sigma", g.incremental_log_norm_sigma},
        {"base_train_per_class", g.base_train_per_class},
        {"base_test_per_class", g.base_test_per_class},
        {"novel_test_per_class", g.novel_test_per_class}}},
      {"train",
       {{"learning_rate", t.learning_rate},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"warmup_epochs", t.warmup_epochs},
        {"hidden_dim", t.hidden_dim},
        {"alpha", t.weights.alpha},
        {"beta", t.weights.beta},
        {"eta0", t.eta0},
        {"lambda", t.lambda},
        {"incremental_learning_rate", t.incremental_learning_rate},
        {"incremental_epochs", t.incremental_epochs}}},
      {"method", method_to_json(e.method)},
      {"outputs", {{"dir", manifest.output_dir}}},
  };
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  StrictObject root(j, "");
  m.tool_version = root.get<std::string>("tool_version");
  auto& e = m.experiment;
  e.seed = root.get<std::uint64_t>("seed");
  e.embedding_dim = root.get<int>("embedding_dim");

  {
    auto o = root.child("scenario");
    auto& s = e.scenario;
    s.total_classes = o.get<int>("total_classes");
    s.base_classes = o.get<int>("base_classes");
    s.sessions = o.get<int>("sessions");
    s.ways = o.get<int>("ways");
    s.shots = o.get<int>("shots");
    const auto mode = o.get<std::string>("mode");
    if (mode == "conventional") {
      s.mode = ScenarioMode::Conventional;
    } else if (mode == "open_ended") {
      s.mode = ScenarioMode::OpenEnded;
    } else {
      throw Error(Errc::InvalidConfig,
                  o.join("mode") + ": expected \"conventional\" or \"open_ended\"");
    }
    auto oe = o.child("open_ended");
    s.open_ended.ways_mean = oe.get<double>("ways_mean");
    s.open_ended.ways_var = oe.get<double>("ways_var");
    s.open_ended.shots_mean = oe.get<double>("shots_mean");
    s.open_ended.shots_var = oe.get<double>("shots_var");
    oe.finish();
    o.finish();
  }
  {
    auto o = root.child("generator");
    auto& g = e.generator;
    g.input_dim = o.get<int>("input_dim");
    g.angular_noise = o.get<double>("angular_noise");
    g.base_log_norm_center = o.get<double>("base_log_norm_center");
    g.base_log_norm_gap = o.get<double>("base_log_norm_gap");
    g.base_log_norm_sigma = o.get<double>("base_log_norm_sigma");
    g.incremental_log_norm_mu = o.get<double>("incremental_log_norm_mu");
    g.incremental_log_norm_sigma = o.get<double>("incremental_log_norm_sigma");
    g.base_train_per_class = o.get<int>("base_train_per_class");
    g.base_test_per_class = o.get<int>("base_test_per_class");
    g.novel_test_per_class = o.get<int>("novel_test_per_class");
    o.finish();
  }
  {
    auto o = root.child("train");
    auto& t = e.train;
    t.learning_rate = o.get<double>("learning_rate");
    t.epochs = o.get<int>("epochs");
    t.batch_size = o.get<int>("batch_size");
    t.warmup_epochs = o.get<int>("warmup_epochs");
    t.hidden_dim = o.get<int>("hidden_dim");
    t.weights.alpha = o.get<double>("alpha");
    t.weights.beta = o.get<double>("beta");
    t.eta0 = o.get<double>("eta0");
    t.lambda = o.get<double>("lambda");
    t.incremental_learning_rate = o.get<double>("incremental_learning_rate");
    t.incremental_epochs = o.get<int>("incremental_epochs");
    o.finish();
  }
  e.method = method_from(root.child("method"));
  {
    auto o = root.child("outputs");
    m.output_dir = o.get<std::string>("dir");
    o.finish();
  }
  root.finish();

  if (e.embedding_dim < 2) throw Error(Errc::InvalidConfig, "embedding_dim: must be >= 2");
  e.train.validate();
  e.generator.validate();
  e.scenario.validate(e.embedding_dim);
  return m;
}

std::string manifest_hash(const RunManifest& manifest) {
  json j = manifest_to_json(manifest);
  j.erase("outputs");
  const std::string text = j.dump();
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest);
  std::string hex;
  char byte[3];
  for (unsigned char c : digest) {
    std::snprintf(byte, sizeof byte, "%02x", c);
    hex += byte;
  }
  return hex;
}

// ---- checkpoint ------------------------------------------------------------

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw Error(Errc::Format, "matrix row count");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(data[r].size()) != cols) throw Error(Errc::Format, "matrix width");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r][c].get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json params_to_json(const NormParams& p) { return {{"mu", p.mu}, {"sigma2", p.sigma2}}; }

NormParams params_from_json(const json& j) {
  return {j.at("mu").get<double>(), j.at("sigma2").get<double>()};
}

}  // namespace

json checkpoint_to_json(const TrainedState& state, const Classifier& classifier,
                        SessionIndex session, std::uint64_t seed, const std::string& hash) {
  const auto& f = state.model.extractor;
  json head_labels = json::array();
  for (auto l : state.model.head.labels) head_labels.push_back(l.id);

  json centers = json::array();
  for (const auto& c : state.bank.centers()) centers.push_back(vector_to_json(c));
  json assignment = json::array();
  for (const auto& [label, index] : state.bank.assignment()) {
    assignment.push_back({{"label", label.id}, {"center", index}});
  }

  json reps = json::array();
  for (const auto& [label, rep] : classifier.reps) {
    reps.push_back({{"label", label.id},
                    {"session", rep.session},
                    {"count", rep.count},
                    {"w", vector_to_json(rep.w)}});
  }
  json norm = nullptr;
  if (classifier.norm) {
    const auto& n = *classifier.norm;
    json base = json::array();
    for (const auto& [label, p] : n.base_params) {
      base.push_back({{"label", label.id}, {"mu", p.mu}, {"sigma2", p.sigma2}});
    }
    json incr = json::array();
    for (auto l : n.incremental_classes) incr.push_back(l.id);
    norm = {{"base", std::move(base)},
            {"shared", n.shared_params ? params_to_json(*n.shared_params) : json(nullptr)},
            {"incremental_classes", std::move(incr)},
            {"variance_floor", n.variance_floor},
            {"transform", transform_name(n.transform)}};
  }

  return {
      {"format", "saan-checkpoint"},
      {"tool_version", kToolVersion},
      {"manifest_hash", hash},
      {"seed", seed},
      {"session", session},
      {"dims",
       {{"input", f.input_dim()}, {"hidden", f.hidden_dim()}, {"embedding", f.embedding_dim()}}},
      {"model",
       {{"w1", matrix_to_json(f.w1)},
        {"b1", vector_to_json(f.b1)},
        {"w2", matrix_to_json(f.w2)},
        {"b2", vector_to_json(f.b2)},
        {"head", matrix_to_json(state.model.head.weight)},
        {"head_labels", std::move(head_labels)},
        {"frozen",
         {{"layer1", state.model.frozen.layer1},
          {"layer2", state.model.frozen.layer2},
          {"head", state.model.frozen.head}}}}},
      {"centers", {{"vectors", std::move(centers)}, {"assignment", std::move(assignment)}}},
      {"classifier",
       {{"compression", classifier.compression},
        {"representatives", std::move(reps)},
        {"norm", std::move(norm)}}},
  };
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format") != "saan-checkpoint") throw Error(Errc::Format, "not a checkpoint");
    Checkpoint cp;
    cp.manifest_hash = j.at("manifest_hash").get<std::string>();
    cp.seed = j.at("seed").get<std::uint64_t>();
    cp.session = j.at("session").get<SessionIndex>();

    const json& m = j.at("model");
    auto& f = cp.state.model.extractor;
    f.w1 = matrix_from_json(m.at("w1"));
    f.b1 = vector_from_json(m.at("b1"));
    f.w2 = matrix_from_json(m.at("w2"));
    f.b2 = vector_from_json(m.at("b2"));
    const json& dims = j.at("dims");
    if (f.input_dim() != dims.at("input").get<int>() ||
        f.hidden_dim() != dims.at("hidden").get<int>() ||
        f.embedding_dim() != dims.at("embedding").get<int>() || f.b1.size() != f.w1.rows() ||
        f.w2.cols() != f.w1.rows() || f.b2.size() != f.w2.rows()) {
      throw Error(Errc::DimensionMismatch, "checkpoint shapes disagree with its dims");
    }
    cp.state.model.head.weight = matrix_from_json(m.at("head"));
    for (const auto& l : m.at("head_labels")) cp.state.model.head.labels.emplace_back(l.get<int>());
    const json& fr = m.at("frozen");
    cp.state.model.frozen = {fr.at("layer1").get<bool>(), fr.at("layer2").get<bool>(),
                             fr.at("head").get<bool>()};

    std::vector<Vector> centers;
    for (const auto& c : j.at("centers").at("vectors")) centers.push_back(vector_from_json(c));
    std::map<ClassLabel, int> assignment;
    for (const auto& a : j.at("centers").at("assignment")) {
      assignment.emplace(ClassLabel(a.at("label").get<int>()), a.at("center").get<int>());
    }
    cp.state.bank = CenterBank(std::move(centers), std::move(assignment));

    const json& c = j.at("classifier");
    cp.classifier.compression = c.at("compression").get<double>();
    for (const auto& r : c.at("representatives")) {
      cp.classifier.reps.emplace(ClassLabel(r.at("label").get<int>()),
                                 Representative{vector_from_json(r.at("w")),
                                                r.at("session").get<SessionIndex>(),
                                                r.at("count").get<int>()});
    }
    const json& n = c.at("norm");
    if (!n.is_null()) {
      NormModel model;
      for (const auto& b : n.at("base")) {
        model.base_params.emplace(ClassLabel(b.at("label").get<int>()), params_from_json(b));
      }
      if (!n.at("shared").is_null()) model.shared_params = params_from_json(n.at("shared"));
      for (const auto& l : n.at("incremental_classes")) {
        model.incremental_classes.insert(ClassLabel(l.get<int>()));
      }
      model.variance_floor = n.at("variance_floor").get<double>();
      model.transform = n.at("transform") == "raw" ? NormTransform::Raw : NormTransform::Log;
      cp.classifier.norm = std::move(model);
    }
    return cp;
  } catch (const json::exception& ex) {
    throw Error(Errc::Format, std::string("checkpoint: ") + ex.what());
  }
}

// ---- results ---------------------------------------------------------------

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json summary_fields(const MetricsReport& m) {
  return {{"per_session_accuracy", m.per_session_accuracy},
          {"last_accuracy", m.last_accuracy()},
          {"drop", m.drop},
          {"base_accuracy", m.base_accuracy},
          {"novel_accuracy", m.novel_accuracy},
          {"harmonic_mean", m.harmonic_mean},
          {"average_accuracy", m.average_accuracy}};
}

std::string csv_optional(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

void write_results_jsonl(std::ostream& out, const RunManifest& manifest,
                         const ExperimentResult& result) {
  const std::string hash = manifest_hash(manifest);
  const std::string method = manifest.experiment.method.name;
  out << json{{"type", "manifest"}, {"manifest_hash", hash}, {"manifest", manifest_to_json(manifest)}}
             .dump()
      << '\n';
  const auto& m = result.metrics;
  for (std::size_t i = 0; i < result.sessions.size(); ++i) {
    const auto& s = result.sessions[i];
    out << json{{"type", "session"},
                {"manifest_hash", hash},
                {"method", method},
                {"session", s.index},
                {"classes", s.classes},
                {"test_samples", s.test_samples},
                {"accuracy", m.per_session_accuracy[i]},
                {"base_accuracy", optional_number(m.per_session_base_accuracy[i])},
                {"novel_accuracy", optional_number(m.per_session_novel_accuracy[i])}}
               .dump()
        << '\n';
  }
  json summary = summary_fields(m);
  summary["type"] = "summary";
  summary["manifest_hash"] = hash;
  summary["method"] = method;
  out << summary.dump() << '\n';
}

void write_results_csv(std::ostream& out, const RunManifest& manifest,
                       const ExperimentResult& result) {
  out << "# manifest_hash=" << manifest_hash(manifest) << '\n';
  out << "method,session,classes,test_samples,accuracy,base_accuracy,novel_accuracy\n";
  const auto& m = result.metrics;
  for (std::size_t i = 0; i < result.sessions.size(); ++i) {
    const auto& s = result.sessions[i];
    out << manifest.experiment.method.name << ',' << s.index << ',' << s.classes << ','
        << s.test_samples << ',' << format_double(m.per_session_accuracy[i]) << ','
        << csv_optional(m.per_session_base_accuracy[i]) << ','
        << csv_optional(m.per_session_novel_accuracy[i]) << '\n';
  }
}

void write_ablation_jsonl(std::ostream& out, const RunManifest& manifest,
                          const std::vector<AblationRow>& rows) {
  const std::string hash = manifest_hash(manifest);
  out << json{{"type", "manifest"}, {"manifest_hash", hash}, {"manifest", manifest_to_json(manifest)}}
             .dump()
      << '\n';
  const double reference = rows.empty() ? 0.0 : rows.front().metrics.last_accuracy();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    json r = summary_fields(rows[i].metrics);
    r["type"] = "ablation";
    r["manifest_hash"] = hash;
    r["row"] = i;
    r["method"] = rows[i].method;
    r["delta_last_accuracy"] = rows[i].metrics.last_accuracy() - reference;
    out << r.dump() << '\n';
  }
}

void write_ablation_csv(std::ostream& out, const RunManifest& manifest,
                        const std::vector<AblationRow>& rows) {
  out << "# manifest_hash=" << manifest_hash(manifest) << '\n';
  out << "row,method,last_accuracy,delta_last_accuracy,drop,average_accuracy,harmonic_mean\n";
  const double reference = rows.empty() ? 0.0 : rows.front().metrics.last_accuracy();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& m = rows[i].metrics;
    out << i << ',' << rows[i].method << ',' << format_double(m.last_accuracy()) << ','
        << format_double(m.last_accuracy() - reference) << ',' << format_double(m.drop) << ','
        << format_double(m.average_accuracy) << ',' << format_double(m.harmonic_mean) << '\n';
  }
}

LoadedResults load_results(std::istream& in, const std::string& expected_hash) {
  LoadedResults out;
  std::string line;
  int lineno = 0;
  bool have_manifest = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception&) {
      throw Error(Errc::Format, "results line " + std::to_string(lineno) + ": not JSON");
    }
    if (!rec.is_object() || !rec.contains("manifest_hash") || !rec["manifest_hash"].is_string()) {
      throw Error(Errc::Format, "results line " + std::to_string(lineno) + ": no manifest_hash");
    }
    if (!have_manifest) {
      if (rec.value("type", "") != "manifest" || !rec.contains("manifest")) {
        throw Error(Errc::Format, "results file must start with a manifest record");
      }
      out.manifest = manifest_from_json(rec["manifest"]);
      out.manifest_hash = manifest_hash(out.manifest);
      if (rec["manifest_hash"] != out.manifest_hash) {
        throw Error(Errc::ManifestMismatch, "embedded manifest does not match its recorded hash");
      }
      if (!expected_hash.empty() && expected_hash != out.manifest_hash) {
        throw Error(Errc::ManifestMismatch, "results were produced by manifest " +
                                                out.manifest_hash + ", expected " + expected_hash);
      }
      have_manifest = true;
      continue;
    }
    if (rec["manifest_hash"] != out.manifest_hash) {
      throw Error(Errc::ManifestMismatch,
                  "results line " + std::to_string(lineno) + ": manifest hash mismatch");
    }
    out.records.push_back(std::move(rec));
  }
  if (!have_manifest) throw Error(Errc::Format, "results file is empty");
  return out;
}

}  // namespace saan
