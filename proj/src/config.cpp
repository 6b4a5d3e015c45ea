#include "mflq/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mflq {

namespace detail {
std::string_view builtin_system_source(std::string_view name);  // generated
}  // namespace detail

namespace {

using json = nlohmann::json;

struct NamedAlgorithm {
  Algorithm id;
  const char* name;
};

constexpr NamedAlgorithm kAlgorithms[] = {
    {Algorithm::kMflqV1, "mflq_v1"}, {Algorithm::kMflqV2, "mflq_v2"},
    {Algorithm::kMflqV3, "mflq_v3"}, {Algorithm::kLspi, "lspi"},
    {Algorithm::kRlsvi, "rlsvi"},    {Algorithm::kModelBased, "model_based"},
    {Algorithm::kOracle, "oracle"},
};

/// 1-based line of the first `"key"` in the text, 0 if absent.
std::size_t line_of_key(std::string_view text, std::string_view key) {
  const std::string quoted = "\"" + std::string(key) + "\"";
  const auto pos = text.find(quoted);
  if (pos == std::string_view::npos) return 0;
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + pos, '\n')) + 1;
}

class Reader {
 public:
  Reader(std::string_view text, std::string_view origin) : text_(text), origin_(origin) {}

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    const std::size_t line = line_of_key(text_, field);
    std::string msg = std::string(origin_);
    if (line > 0) msg += ":" + std::to_string(line);
    msg += ": " + field + ": " + what;
    throw ConfigError(msg, field, line);
  }

  MatrixXd matrix(const json& node, const std::string& field) const {
    if (node.is_number()) return MatrixXd::Constant(1, 1, node.get<double>());
    if (!node.is_array() || node.empty()) fail(field, "expected a non-empty list of rows");
    const Index rows = static_cast<Index>(node.size());
    Index cols = -1;
    MatrixXd out;
    for (Index r = 0; r < rows; ++r) {
      const json& row = node[static_cast<std::size_t>(r)];
      if (!row.is_array()) fail(field, "row " + std::to_string(r + 1) + " is not a list");
      if (cols < 0) {
        cols = static_cast<Index>(row.size());
        if (cols == 0) fail(field, "empty row");
        out.resize(rows, cols);
      } else if (static_cast<Index>(row.size()) != cols) {
        fail(field, "row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                        " entries, expected " + std::to_string(cols));
      }
      for (Index c = 0; c < cols; ++c) {
        const json& v = row[static_cast<std::size_t>(c)];
        if (!v.is_number()) fail(field, "non-numeric entry");
        out(r, c) = v.get<double>();
      }
    }
    return out;
  }

  double number(const json& node, const std::string& field) const {
    if (!node.is_number()) fail(field, "expected a number");
    return node.get<double>();
  }

  std::int64_t integer(const json& node, const std::string& field) const {
    if (node.is_number_integer()) return node.get<std::int64_t>();
    if (node.is_number_float()) {
      const double v = node.get<double>();
      if (v == static_cast<double>(static_cast<std::int64_t>(v))) {
        return static_cast<std::int64_t>(v);
      }
    }
    fail(field, "expected an integer");
  }

 private:
  std::string_view text_;
  std::string_view origin_;
};

json parse_json(std::string_view text, std::string_view origin) {
  try {
    return json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points at the offending character.
    const std::size_t offset = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const std::size_t line =
        static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n')) + 1;
    throw ConfigError(std::string(origin) + ":" + std::to_string(line) + ": " + e.what(), {},
                      line);
  }
}

LqSystem system_from(const json& node, const Reader& reader) {
  if (!node.is_object()) reader.fail("system", "expected a builtin name or an object");
  if (!node.contains("A") || !node.contains("B")) reader.fail("system", "needs A and B");
  LqSystem sys;
  sys.A = reader.matrix(node["A"], "A");
  sys.B = reader.matrix(node["B"], "B");
  const Index n = sys.A.rows();
  const Index d = sys.B.cols();
  sys.M = node.contains("M") ? reader.matrix(node["M"], "M") : MatrixXd::Identity(n, n);
  sys.N = node.contains("N") ? reader.matrix(node["N"], "N") : MatrixXd::Identity(d, d);
  sys.W = node.contains("W") ? reader.matrix(node["W"], "W") : MatrixXd::Identity(n, n);
  try {
    sys.validate();
  } catch (const Error& e) {
    reader.fail("system", e.what());
  }
  return sys;
}

}  // namespace

std::string to_string(Algorithm a) {
  for (const auto& entry : kAlgorithms) {
    if (entry.id == a) return entry.name;
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  for (const auto& entry : kAlgorithms) {
    if (name == entry.name) return entry.id;
  }
  throw ConfigError("unknown algorithm '" + std::string(name) + "'", "algorithm");
}

const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> list = [] {
    std::vector<Algorithm> out;
    for (const auto& entry : kAlgorithms) out.push_back(entry.id);
    return out;
  }();
  return list;
}

std::vector<std::string> builtin_system_names() { return {"dean2017", "lewis-power"}; }

BuiltinSystem builtin_system(std::string_view name) {
  const std::string_view source = detail::builtin_system_source(name);
  if (source.empty()) {
    throw ConfigError("unknown builtin system '" + std::string(name) + "'", "system");
  }
  const std::string origin = "builtin:" + std::string(name);
  const json node = parse_json(source, origin);
  const Reader reader(source, origin);
  BuiltinSystem out;
  out.system = system_from(node, reader);
  if (node.contains("sigma_a")) out.sigma_a = reader.number(node["sigma_a"], "sigma_a");
  return out;
}

ExperimentConfig parse_config(std::string_view text, std::string_view origin) {
  const json root = parse_json(text, origin);
  const Reader reader(text, origin);
  if (!root.is_object()) reader.fail("(root)", "expected an object");

  static const char* const kKnown[] = {"system",  "algorithm", "T",
                                       "xi",      "T_s",       "seeds",
                                       "sigma_a", "initial_policy_scale",
                                       "output",  "estimates", "unknown_noise",
                                       "burn_in"};
  for (const auto& item : root.items()) {
    if (std::none_of(std::begin(kKnown), std::end(kKnown),
                     [&](const char* k) { return item.key() == k; })) {
      reader.fail(item.key(), "unknown field");
    }
  }

  ExperimentConfig cfg;
  if (!root.contains("system")) reader.fail("system", "missing");
  double default_sigma = 1.0;
  const json& sys_node = root["system"];
  if (sys_node.is_string()) {
    cfg.system_name = sys_node.get<std::string>();
    try {
      BuiltinSystem builtin = builtin_system(cfg.system_name);
      cfg.system = std::move(builtin.system);
      default_sigma = builtin.sigma_a;
    } catch (const ConfigError& e) {
      reader.fail("system", e.what());
    }
  } else {
    cfg.system = system_from(sys_node, reader);
  }
  const Index d = cfg.system.action_dim();

  if (!root.contains("algorithm")) reader.fail("algorithm", "missing");
  const json& alg = root["algorithm"];
  auto add_algorithm = [&](const json& node) {
    if (!node.is_string()) reader.fail("algorithm", "expected a name");
    try {
      cfg.algorithms.push_back(parse_algorithm(node.get<std::string>()));
    } catch (const ConfigError& e) {
      reader.fail("algorithm", e.what());
    }
  };
  if (alg.is_array()) {
    for (const auto& a : alg) add_algorithm(a);
  } else {
    add_algorithm(alg);
  }
  if (cfg.algorithms.empty()) reader.fail("algorithm", "empty list");

  if (!root.contains("T")) reader.fail("T", "missing");
  cfg.horizon = reader.integer(root["T"], "T");
  if (cfg.horizon < kMinHorizon) reader.fail("T", "must be at least " + std::to_string(kMinHorizon));

  if (root.contains("xi")) cfg.xi = reader.number(root["xi"], "xi");
  if (!(cfg.xi >= 0.0 && cfg.xi < 0.25)) reader.fail("xi", "must lie in [0, 0.25)");
  if (root.contains("T_s")) cfg.exploration_period = reader.integer(root["T_s"], "T_s");
  if (cfg.exploration_period < 1) reader.fail("T_s", "must be positive");

  if (!root.contains("seeds")) reader.fail("seeds", "missing");
  const json& seeds = root["seeds"];
  if (seeds.is_array()) {
    for (const auto& s : seeds) {
      const auto v = reader.integer(s, "seeds");
      if (v < 0) reader.fail("seeds", "seeds must be non-negative");
      cfg.seeds.push_back(static_cast<std::uint64_t>(v));
    }
  } else if (seeds.is_object()) {
    const auto start = seeds.contains("start") ? reader.integer(seeds["start"], "seeds") : 0;
    if (!seeds.contains("count")) reader.fail("seeds", "needs count");
    const auto count = reader.integer(seeds["count"], "seeds");
    if (start < 0 || count < 0) reader.fail("seeds", "start and count must be non-negative");
    for (std::int64_t i = 0; i < count; ++i) {
      cfg.seeds.push_back(static_cast<std::uint64_t>(start + i));
    }
  } else {
    reader.fail("seeds", "expected a list or {start, count}");
  }
  if (cfg.seeds.empty()) reader.fail("seeds", "no seeds");

  if (root.contains("sigma_a")) {
    const json& node = root["sigma_a"];
    if (node.is_number()) {
      cfg.action_cov = node.get<double>() * MatrixXd::Identity(d, d);
    } else {
      cfg.action_cov = reader.matrix(node, "sigma_a");
    }
  } else {
    cfg.action_cov = default_sigma * MatrixXd::Identity(d, d);
  }
  if (cfg.action_cov.rows() != d || cfg.action_cov.cols() != d) {
    reader.fail("sigma_a", "must be " + std::to_string(d) + " x " + std::to_string(d));
  }
  if (!is_symmetric(cfg.action_cov, 1e-12) ||
      Eigen::LLT<MatrixXd>(cfg.action_cov).info() != Eigen::Success) {
    reader.fail("sigma_a", "must be symmetric positive definite");
  }

  if (root.contains("initial_policy_scale")) {
    cfg.initial_policy_scale =
        reader.number(root["initial_policy_scale"], "initial_policy_scale");
    if (!(cfg.initial_policy_scale > 0.0)) {
      reader.fail("initial_policy_scale", "must be positive");
    }
  }
  if (root.contains("output")) {
    if (!root["output"].is_string()) reader.fail("output", "expected a path");
    cfg.output = root["output"].get<std::string>();
  }
  if (root.contains("estimates")) {
    const json& node = root["estimates"];
    if (node == "sampled") {
      cfg.estimates = EstimateSource::kSampled;
    } else if (node == "oracle") {
      cfg.estimates = EstimateSource::kOracle;
    } else {
      reader.fail("estimates", "expected \"sampled\" or \"oracle\"");
    }
  }
  if (root.contains("unknown_noise")) {
    if (!root["unknown_noise"].is_boolean()) reader.fail("unknown_noise", "expected a boolean");
    cfg.unknown_noise = root["unknown_noise"].get<bool>();
  }
  if (root.contains("burn_in")) {
    cfg.burn_in = reader.integer(root["burn_in"], "burn_in");
    if (cfg.burn_in < 0) reader.fail("burn_in", "must be non-negative");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string(), "path");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

}  // namespace mflq
