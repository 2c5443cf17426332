#include "condkl/app/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "condkl/random.hpp"

namespace condkl::app {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& v, int line) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || !std::isfinite(x)) throw ConfigError("'" + v + "' is not a finite number", line);
  return x;
}

template <class Int>
Int parse_int(const std::string& v, int line) {
  Int x{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("'" + v + "' is not an integer", line);
  return x;
}

bool parse_bool(const std::string& v, int line) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError("'" + v + "' is not a boolean", line);
}

std::optional<std::uint64_t> parse_seed(const std::string& v, int line) {
  if (v == "auto") return std::nullopt;
  return parse_int<std::uint64_t>(v, line);
}

// Shortest decimal that round-trips, so echoed configs read naturally.
std::string real_text(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string seed_text(const std::optional<std::uint64_t>& s) { return s ? std::to_string(*s) : "auto"; }

std::string join_longs(const std::vector<long>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<long> parse_longs(const std::string& v, int line) {
  std::vector<long> out;
  if (v.empty() || v == "none") return out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_int<long>(trim(item), line));
  return out;
}

std::string methods_text(const std::vector<AcquisitionMethod>& m) {
  if (m.size() == 2) return "both";
  return std::string(to_string(m.at(0)));
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, int)> set;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"domain", "lx", [](auto& c) { return real_text(c.lx); },
       [](auto& c, auto& v, int l) { c.lx = parse_real(v, l); }},
      {"domain", "ly", [](auto& c) { return real_text(c.ly); },
       [](auto& c, auto& v, int l) { c.ly = parse_real(v, l); }},
      {"grid", "nx", [](auto& c) { return std::to_string(c.nx); },
       [](auto& c, auto& v, int l) { c.nx = parse_int<int>(v, l); }},
      {"grid", "ny", [](auto& c) { return std::to_string(c.ny); },
       [](auto& c, auto& v, int l) { c.ny = parse_int<int>(v, l); }},
      {"kernel", "sigma", [](auto& c) { return real_text(c.kernel.sigma); },
       [](auto& c, auto& v, int l) { c.kernel.sigma = parse_real(v, l); }},
      {"kernel", "l1", [](auto& c) { return real_text(c.kernel.l1); },
       [](auto& c, auto& v, int l) { c.kernel.l1 = parse_real(v, l); }},
      {"kernel", "l2", [](auto& c) { return real_text(c.kernel.l2); },
       [](auto& c, auto& v, int l) { c.kernel.l2 = parse_real(v, l); }},
      {"kernel", "sigma_eps", [](auto& c) { return real_text(c.kernel.sigma_eps); },
       [](auto& c, auto& v, int l) { c.kernel.sigma_eps = parse_real(v, l); }},
      {"kernel", "convention", [](auto& c) { return std::string(to_string(c.kernel.convention)); },
       [](auto& c, auto& v, int l) {
         auto conv = parse_convention(v);
         if (!conv) throw ConfigError("convention must be 'plain' or 'rbf'", l);
         c.kernel.convention = *conv;
       }},
      {"kernel", "fit", [](auto& c) { return std::string(c.fit_kernel ? "true" : "false"); },
       [](auto& c, auto& v, int l) { c.fit_kernel = parse_bool(v, l); }},
      {"kernel", "fit_starts", [](auto& c) { return std::to_string(c.fit_starts); },
       [](auto& c, auto& v, int l) { c.fit_starts = parse_int<int>(v, l); }},
      {"reference", "seed", [](auto& c) { return seed_text(c.reference_seed); },
       [](auto& c, auto& v, int l) { c.reference_seed = parse_seed(v, l); }},
      {"observations", "count", [](auto& c) { return std::to_string(c.n_obs); },
       [](auto& c, auto& v, int l) { c.n_obs = parse_int<int>(v, l); }},
      {"observations", "seed", [](auto& c) { return seed_text(c.observation_seed); },
       [](auto& c, auto& v, int l) { c.observation_seed = parse_seed(v, l); }},
      {"model", "approach", [](auto& c) { return to_string(c.approach); },
       [](auto& c, auto& v, int l) {
         if (v == "approach-1" || v == "1") c.approach = ApproachSelection::kApproach1;
         else if (v == "approach-2" || v == "2") c.approach = ApproachSelection::kApproach2;
         else if (v == "both") c.approach = ApproachSelection::kBoth;
         else throw ConfigError("approach must be approach-1, approach-2 or both", l);
       }},
      {"model", "fraction", [](auto& c) { return real_text(c.fraction); },
       [](auto& c, auto& v, int l) { c.fraction = parse_real(v, l); }},
      {"model", "d", [](auto& c) { return std::to_string(c.d); },
       [](auto& c, auto& v, int l) { c.d = parse_int<int>(v, l); }},
      {"model", "d_c", [](auto& c) { return std::to_string(c.d_c); },
       [](auto& c, auto& v, int l) { c.d_c = parse_int<int>(v, l); }},
      {"model", "compare_r", [](auto& c) { return std::to_string(c.compare_r); },
       [](auto& c, auto& v, int l) { c.compare_r = parse_int<int>(v, l); }},
      {"propagation", "model", [](auto& c) { return to_string(c.propagate_model); },
       [](auto& c, auto& v, int l) {
         if (v == "unconditional") c.propagate_model = ModelChoice::kUnconditional;
         else if (v == "approach-1") c.propagate_model = ModelChoice::kApproach1;
         else if (v == "approach-2") c.propagate_model = ModelChoice::kApproach2;
         else throw ConfigError("model must be unconditional, approach-1 or approach-2", l);
       }},
      {"propagation", "method", [](auto& c) { return to_string(c.propagation); },
       [](auto& c, auto& v, int l) {
         if (v == "mc") c.propagation = PropagationMethod::kMonteCarlo;
         else if (v == "collocation") c.propagation = PropagationMethod::kCollocation;
         else if (v == "both") c.propagation = PropagationMethod::kBoth;
         else throw ConfigError("method must be mc, collocation or both", l);
       }},
      {"propagation", "samples", [](auto& c) { return std::to_string(c.mc_samples); },
       [](auto& c, auto& v, int l) { c.mc_samples = parse_int<long>(v, l); }},
      {"propagation", "level", [](auto& c) { return std::to_string(c.level); },
       [](auto& c, auto& v, int l) { c.level = parse_int<int>(v, l); }},
      {"propagation", "checkpoints", [](auto& c) { return join_longs(c.checkpoints); },
       [](auto& c, auto& v, int l) { c.checkpoints = parse_longs(v, l); }},
      {"active_learning", "method", [](auto& c) { return methods_text(c.learn_methods); },
       [](auto& c, auto& v, int l) {
         if (v == "both") {
           c.learn_methods = {AcquisitionMethod::kMethod1, AcquisitionMethod::kMethod2};
         } else if (auto m = parse_method(v)) {
           c.learn_methods = {*m};
         } else {
           throw ConfigError("method must be method-1, method-2 or both", l);
         }
       }},
      {"active_learning", "n_am", [](auto& c) { return std::to_string(c.n_am); },
       [](auto& c, auto& v, int l) { c.n_am = parse_int<int>(v, l); }},
      {"active_learning", "ensemble", [](auto& c) { return std::to_string(c.ensemble); },
       [](auto& c, auto& v, int l) { c.ensemble = parse_int<long>(v, l); }},
      {"active_learning", "samples", [](auto& c) { return std::to_string(c.learn_samples); },
       [](auto& c, auto& v, int l) { c.learn_samples = parse_int<long>(v, l); }},
      {"run", "seed", [](auto& c) { return std::to_string(c.seed); },
       [](auto& c, auto& v, int l) { c.seed = parse_int<std::uint64_t>(v, l); }},
      {"run", "output", [](auto& c) { return c.output; },
       [](auto& c, auto& v, int) { c.output = v; }},
  };
  return table;
}

}  // namespace

std::string to_string(ApproachSelection a) {
  switch (a) {
    case ApproachSelection::kApproach1: return "approach-1";
    case ApproachSelection::kApproach2: return "approach-2";
    case ApproachSelection::kBoth: break;
  }
  return "both";
}

std::string to_string(PropagationMethod p) {
  switch (p) {
    case PropagationMethod::kMonteCarlo: return "mc";
    case PropagationMethod::kCollocation: return "collocation";
    case PropagationMethod::kBoth: break;
  }
  return "both";
}

std::string to_string(ModelChoice m) {
  switch (m) {
    case ModelChoice::kApproach1: return "approach-1";
    case ModelChoice::kApproach2: return "approach-2";
    case ModelChoice::kUnconditional: break;
  }
  return "unconditional";
}

std::uint64_t ExperimentConfig::reference_seed_value() const {
  return reference_seed ? *reference_seed : derive_seed(seed, 1);
}
std::uint64_t ExperimentConfig::observation_seed_value() const {
  return observation_seed ? *observation_seed : derive_seed(seed, 2);
}
std::uint64_t ExperimentConfig::mc_seed() const { return derive_seed(seed, 3); }
std::uint64_t ExperimentConfig::learn_seed() const { return derive_seed(seed, 4); }
std::uint64_t ExperimentConfig::fit_seed() const { return derive_seed(seed, 5); }

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(lx > 0 && ly > 0, "domain.lx and domain.ly must be positive");
  require(nx >= 2 && ny >= 2, "grid.nx and grid.ny must be >= 2");
  require(kernel.sigma >= 0, "kernel.sigma must be >= 0");
  require(kernel.l1 > 0 && kernel.l2 > 0, "kernel.l1 and kernel.l2 must be positive");
  require(kernel.sigma_eps >= 0, "kernel.sigma_eps must be >= 0");
  require(fit_starts >= 1, "kernel.fit_starts must be >= 1");
  require(n_obs >= 1, "observations.count must be >= 1");
  require(fraction > 0 && fraction <= 1, "model.fraction must be in (0, 1]");
  require(d >= 0 && d_c >= 0 && compare_r >= 0, "model dimensions must be >= 0");
  require(mc_samples >= 2, "propagation.samples must be >= 2");
  require(level >= 1 && level <= 8, "propagation.level must be in [1, 8]");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    require(checkpoints[i] >= 2 && checkpoints[i] <= mc_samples,
            "propagation.checkpoints must lie in [2, samples]");
    require(i == 0 || checkpoints[i] > checkpoints[i - 1], "propagation.checkpoints must be increasing");
  }
  require(n_am >= 1, "active_learning.n_am must be >= 1");
  require(ensemble >= 2, "active_learning.ensemble must be >= 2");
  require(learn_samples >= 2, "active_learning.samples must be >= 2");
  require(!output.empty(), "run.output must not be empty");
}

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, std::map<std::string, const Field*>> index;
  for (const Field& f : fields()) index[f.section][f.key] = &f;

  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::set<std::string> seen;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("malformed section header '" + s + "'", line);
      section = trim(s.substr(1, s.size() - 2));
      if (!index.count(section)) throw ConfigError("unknown section [" + section + "]", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + s + "'", line);
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' appears before any [section]", line);
    auto it = index[section].find(key);
    if (it == index[section].end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]", line);
    if (!seen.insert(section + "." + key).second)
      throw ConfigError("duplicate key '" + key + "' in [" + section + "]", line);
    it->second->set(cfg, value, line);
  }
  cfg.validate();
  return cfg;
}

std::optional<ExperimentConfig> preset(const std::string& name) {
  if (name != "paper-sigma065" && name != "paper-sigma13") return std::nullopt;
  ExperimentConfig c;
  c.kernel = {name == "paper-sigma13" ? 1.3 : 0.65, 0.15, 0.2, 0.0, LengthScaleConvention::kRbf};
  c.nx = 120;
  c.ny = 60;
  c.n_obs = 40;
  c.fraction = 0.99;
  c.d = 60;
  c.d_c = 0;
  c.propagation = PropagationMethod::kBoth;
  c.mc_samples = 15000;
  c.level = 3;
  c.checkpoints = {500, 1000, 2000, 4000, 7500, 10000, 15000};
  c.n_am = 15;
  c.ensemble = 200;
  c.learn_samples = 1000;
  c.seed = 20190101;
  c.output = "out/" + name;
  return c;
}

std::vector<std::string> preset_names() { return {"paper-sigma065", "paper-sigma13"}; }

std::string canonical_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) {
    // Where results go does not change them.
    if (f.section == "run" && f.key == "output") continue;
    out += f.section + "." + f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace condkl::app
