#include "config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gmmpower::cli {
namespace {

using json = nlohmann::json;

class Section {
 public:
  Section(const json& node, std::string path, std::initializer_list<const char*> allowed) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError((path_.empty() ? std::string("config") : path_) + " must be a JSON object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : node_.items())
      if (!keys.contains(key)) throw ConfigError("unknown key '" + key_path(key) + "'");
  }

  bool has(const char* key) const { return node_.contains(key); }
  const json& at(const char* key) const { return node_.at(key); }
  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  long long integer(const char* key, long long min_value, const char* what) const {
    const json& v = node_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < min_value) throw ConfigError(key_path(key) + " must be " + what);
    return v.get<long long>();
  }
  std::uint64_t unsigned64(const char* key) const {
    const json& v = node_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    throw ConfigError(key_path(key) + " must be a non-negative integer");
  }
  double number(const char* key) const {
    const json& v = node_.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) throw ConfigError(key_path(key) + " must be a finite number");
    return v.get<double>();
  }
  std::string string(const char* key) const {
    const json& v = node_.at(key);
    if (!v.is_string()) throw ConfigError(key_path(key) + " must be a string");
    return v.get<std::string>();
  }
  bool boolean(const char* key) const {
    const json& v = node_.at(key);
    if (!v.is_boolean()) throw ConfigError(key_path(key) + " must be true or false");
    return v.get<bool>();
  }

 private:
  const json& node_;
  std::string path_;
};

std::vector<Eigen::Index> sample_sizes(const json& v, const std::string& path) {
  std::vector<Eigen::Index> out;
  auto add = [&](const json& e) {
    if (!e.is_number_integer() || e.get<long long>() < 1) throw ConfigError(path + " must be a positive integer or a list of them");
    out.push_back(static_cast<Eigen::Index>(e.get<long long>()));
  };
  if (v.is_array()) {
    if (v.empty()) throw ConfigError(path + " must not be empty");
    for (const auto& e : v) add(e);
  } else {
    add(v);
  }
  return out;
}

Vector vector_of(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path + " must be a non-empty array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(path + "[" + std::to_string(i) + "] must be a number");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

Matrix matrix_of(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty())
    throw ConfigError(path + " must be a non-empty array of rows");
  const auto cols = v[0].size();
  Matrix out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < v.size(); ++r) {
    const std::string row_path = path + "[" + std::to_string(r) + "]";
    if (!v[r].is_array() || v[r].size() != cols) throw ConfigError(row_path + " must have " + std::to_string(cols) + " entries");
    out.row(static_cast<Eigen::Index>(r)) = vector_of(v[r], row_path).transpose();
  }
  return out;
}

Hypothesis hypothesis_of(const json& v, const std::string& path) {
  const Section s(v, path, {"H", "h0"});
  if (!s.has("H") || !s.has("h0")) throw ConfigError(path + " needs both H and h0");
  Hypothesis h{matrix_of(s.at("H"), path + ".H"), vector_of(s.at("h0"), path + ".h0")};
  if (h.h0.size() != h.H.rows()) throw ConfigError(path + ".h0 must have one entry per row of H");
  return h;
}

template <class F>
auto wrap(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void parse_simulate(const json& node, SimulateSection& out) {
  const Section s(node, "simulate",
                  {"setting", "n", "T", "replications", "optimizer", "alpha", "master_seed", "threads", "oracle_size"});
  if (s.has("setting")) out.config.setting = wrap("simulate.setting", [&] { return setting_from_string(s.string("setting")); });
  if (s.has("n")) out.n_grid = sample_sizes(s.at("n"), "simulate.n");
  if (s.has("T")) out.config.T = s.integer("T", 2, "an integer >= 2");
  if (s.has("replications"))
    out.config.replications = static_cast<int>(s.integer("replications", 1, "a positive integer"));
  if (s.has("optimizer"))
    out.config.optimizer = wrap("simulate.optimizer", [&] { return method_from_string(s.string("optimizer")); });
  if (s.has("alpha")) out.config.alpha = s.number("alpha");
  if (s.has("master_seed")) out.config.master_seed = s.unsigned64("master_seed");
  if (s.has("threads")) out.threads = static_cast<unsigned>(s.integer("threads", 0, "a non-negative integer"));
  if (s.has("oracle_size")) out.oracle_size = s.integer("oracle_size", 1, "a positive integer");
}

std::vector<NcpConvention> conventions_of(const std::string& text, const std::string& path) {
  if (text == "both") return {NcpConvention::Standard, NcpConvention::Half};
  return {wrap(path, [&] { return convention_from_string(text); })};
}

void parse_power(const json& node, PowerSection& out) {
  const Section s(node, "power",
                  {"df", "alpha", "grid", "effect", "sigma2", "from_fit", "coefficient", "beta0", "hypothesis", "G0",
                   "S0", "convention"});
  if (s.has("df")) out.df = static_cast<int>(s.integer("df", 1, "a positive integer"));
  if (s.has("alpha")) out.alpha = s.number("alpha");
  if (s.has("grid")) out.grid = sample_sizes(s.at("grid"), "power.grid");
  if (s.has("effect")) out.effect = s.number("effect");
  if (s.has("sigma2")) out.sigma2 = s.number("sigma2");
  if (s.has("from_fit")) out.from_fit = s.string("from_fit");
  if (s.has("coefficient")) out.coefficient = s.string("coefficient");
  if (s.has("beta0")) out.beta0 = vector_of(s.at("beta0"), "power.beta0");
  if (s.has("hypothesis")) out.hypothesis = hypothesis_of(s.at("hypothesis"), "power.hypothesis");
  if (s.has("G0")) out.G0 = matrix_of(s.at("G0"), "power.G0");
  if (s.has("S0")) out.S0 = matrix_of(s.at("S0"), "power.S0");
  if (s.has("convention")) out.conventions = conventions_of(s.string("convention"), "power.convention");
}

void parse_fit(const json& node, FitSection& out) {
  const Section s(node, "fit", {"data", "regressors", "types", "test", "hypothesis", "optimizer", "alpha"});
  if (s.has("data")) out.data = s.string("data");
  if (s.has("regressors")) {
    const json& r = s.at("regressors");
    if (!r.is_array() || r.empty()) throw ConfigError("fit.regressors must be a non-empty array of strings");
    out.regressors.clear();
    for (const auto& e : r) {
      if (!e.is_string()) throw ConfigError("fit.regressors must be a non-empty array of strings");
      out.regressors.push_back(e.get<std::string>());
    }
  }
  if (s.has("types")) {
    const json& t = s.at("types");
    if (!t.is_object()) throw ConfigError("fit.types must be an object mapping covariate names to types");
    for (const auto& [name, value] : t.items()) {
      if (!value.is_string()) throw ConfigError("fit.types." + name + " must be a string");
      out.types[name] = value.get<std::string>();
    }
  }
  if (s.has("test")) {
    const Section t(s.at("test"), "fit.test", {"coefficient", "value"});
    if (!t.has("coefficient")) throw ConfigError("fit.test needs a coefficient");
    out.test_coefficient = t.string("coefficient");
    if (t.has("value")) out.test_value = t.number("value");
  }
  if (s.has("hypothesis")) out.hypothesis = hypothesis_of(s.at("hypothesis"), "fit.hypothesis");
  if (s.has("optimizer")) out.optimizer = wrap("fit.optimizer", [&] { return method_from_string(s.string("optimizer")); });
  if (s.has("alpha")) out.alpha = s.number("alpha");
}

void parse_qq(const json& node, QQSection& out) {
  const Section s(node, "qq", {"statistics", "column", "df", "ncp", "n", "variant"});
  if (s.has("statistics")) out.statistics = s.string("statistics");
  if (s.has("column")) out.column = s.string("column");
  if (s.has("df")) out.df = static_cast<int>(s.integer("df", 1, "a positive integer"));
  if (s.has("ncp")) out.ncp = s.number("ncp");
  if (s.has("n")) out.n = s.integer("n", 1, "a positive integer");
  if (s.has("variant")) out.variant = s.string("variant");
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  const Section top(root, "", {"simulate", "power", "fit", "qq", "output"});
  RunConfig cfg;
  if (top.has("simulate")) parse_simulate(top.at("simulate"), cfg.simulate);
  if (top.has("power")) parse_power(top.at("power"), cfg.power);
  if (top.has("fit")) parse_fit(top.at("fit"), cfg.fit);
  if (top.has("qq")) parse_qq(top.at("qq"), cfg.qq);
  if (top.has("output")) {
    const Section o(top.at("output"), "output", {"directory"});
    if (o.has("directory")) cfg.output_directory = o.string("directory");
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace gmmpower::cli
