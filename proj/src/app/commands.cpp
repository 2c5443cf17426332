#include "condkl/app/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <ostream>

#include <json.hpp>

#include "condkl/app/experiment.hpp"
#include "condkl/error.hpp"
#include "condkl/field_io.hpp"
#include "condkl/linalg.hpp"

namespace condkl::app {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

class LockFile {
 public:
  explicit LockFile(fs::path path) : path_(std::move(path)) {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) return;
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
  ~LockFile() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;
  bool held() const { return fd_ >= 0; }

 private:
  fs::path path_;
  int fd_ = -1;
};

// Where a failure happened, for the error report.
struct Stage {
  std::string module = "cli";
  std::string name = "startup";
};

Json config_json(const ExperimentConfig& cfg) {
  Json j = Json::object();
  const std::string text = canonical_text(cfg);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    const auto dot = line.find('.');
    const auto eq = line.find(" = ");
    j[line.substr(0, dot)][line.substr(dot + 1, eq - dot - 1)] = line.substr(eq + 3);
  }
  return j;
}

Json theta_json(const KernelHyperparams& t) {
  return {{"sigma", t.sigma},
          {"l1", t.l1},
          {"l2", t.l2},
          {"sigma_eps", t.sigma_eps},
          {"convention", std::string(to_string(t.convention))}};
}

Json moment_norms(const StructuredGrid& grid, const MomentField& m) {
  return {{"mean", field_l2_norm(grid, m.mean)}, {"std", field_l2_norm(grid, m.std)}};
}

class Outputs {
 public:
  Outputs(fs::path dir, const ExperimentConfig& cfg, std::string command)
      : dir_(std::move(dir)), cfg_(cfg), command_(std::move(command)), hash_(config_hash(cfg)) {}

  Json header() const {
    return {{"command", command_}, {"config_hash", hash_}, {"seed", cfg_.seed}};
  }

  void csv(const std::string& stem, const std::string& text) {
    write_text(dir_ / (stem + ".csv"), text);
    Json meta = header();
    meta["file"] = stem + ".csv";
    meta["columns"] = Json::array();
    const std::string head = text.substr(0, text.find('\n'));
    std::size_t pos = 0;
    while (pos <= head.size()) {
      const auto comma = std::min(head.find(',', pos), head.size());
      meta["columns"].push_back(head.substr(pos, comma - pos));
      pos = comma + 1;
    }
    meta["rows"] = static_cast<long>(std::count(text.begin(), text.end(), '\n')) - 1;
    json(stem, meta);
  }

  void json(const std::string& stem, const Json& j) { write_text(dir_ / (stem + ".json"), j.dump(2) + "\n"); }

  /// Summary JSON with the config echoed in full.
  void summary(const std::string& stem, Json body) {
    Json j = header();
    j["config"] = config_json(cfg_);
    for (auto& [k, v] : body.items()) j[k] = v;
    json(stem, j);
  }

 private:
  fs::path dir_;
  const ExperimentConfig& cfg_;
  std::string command_;
  std::string hash_;
};

struct Context {
  const ExperimentConfig& cfg;
  Outputs& out;
  Stage& stage;
  std::ostream& log;
  int threads;

  template <class F>
  auto timed(const std::string& module, const std::string& name, F&& f) {
    stage = {module, name};
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log << "[condkl] " << module << "/" << name << ": " << s << " s\n";
    };
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto r = f();
      finish();
      return r;
    }
  }
};

Synthesis synth_inputs(Context& c) {
  return c.timed("kernel_gp", "synthesize", [&] { return synthesize(c.cfg); });
}

Json fit_json(const FitResult& r) {
  return {{"theta", theta_json(r.theta)}, {"log_marginal_likelihood", r.lml}, {"improved", r.improved}};
}

void cmd_synth(Context& c) {
  const Synthesis s = synth_inputs(c);
  c.stage = {"cli", "write"};
  const Vector k = s.g_ref.array().exp().matrix();
  c.out.csv("g_ref", field_csv(s.grid, s.g_ref));
  c.out.csv("k_ref", field_csv(s.grid, k));
  c.out.csv("observations", observations_csv(s.obs));
  const double mean = s.g_ref.mean();
  const double sd = s.g_ref.size() > 1
                        ? std::sqrt((s.g_ref.array() - mean).square().sum() / static_cast<double>(s.g_ref.size() - 1))
                        : 0.0;
  c.out.summary("synth", {{"nodes", s.grid.size()},
                          {"observations", s.obs.size()},
                          {"reference_seed", c.cfg.reference_seed_value()},
                          {"observation_seed", c.cfg.observation_seed_value()},
                          {"g_ref", {{"l2_norm", field_l2_norm(s.grid, s.g_ref)}, {"mean", mean}, {"std", sd}}}});
}

void cmd_fit(Context& c) {
  const Synthesis s = synth_inputs(c);
  const FitResult r = c.timed("kernel_gp", "fit", [&] { return fit_kernel(c.cfg, s.obs); });
  c.stage = {"cli", "write"};
  Json body = fit_json(r);
  body["starts"] = c.cfg.fit_starts;
  body["fit_seed"] = c.cfg.fit_seed();
  c.out.summary("fit", body);
}

KernelHyperparams kernel_for(Context& c, const Synthesis& s, Json& summary) {
  std::optional<FitResult> fit;
  const KernelHyperparams theta = c.timed("kernel_gp", "hyperparameters", [&] { return resolve_kernel(c.cfg, s.obs, &fit); });
  summary["theta"] = theta_json(theta);
  if (fit) summary["fit"] = fit_json(*fit);
  return theta;
}

Vector implied_spectrum(const ConditionalKLModel& m) {
  const Matrix gram = m.modes.transpose() * m.grid.weights().asDiagonal() * m.modes;
  return symmetric_eigenvalues(gram).cwiseMax(0.0);
}

void cmd_condition(Context& c) {
  const Synthesis s = synth_inputs(c);
  Json summary;
  const KernelHyperparams theta = kernel_for(c, s, summary);
  const bool a1 = c.cfg.approach != ApproachSelection::kApproach2;
  const bool a2 = c.cfg.approach != ApproachSelection::kApproach1;
  const Models m = c.timed("conditioning", "build_models", [&] { return build_models(c.cfg, theta, s.obs, a1, a2); });

  c.stage = {"cli", "write"};
  std::vector<std::string> names{"mean_unconditional", "std_unconditional"};
  std::vector<MomentField> fields{implied_moment_field(m.unconditional)};
  summary["d"] = m.d;
  summary["unconditional"] = {{"retained_fraction", m.head.eigenvalues.head(m.d).sum() / m.head.total_variance},
                              {"std_g_norm", field_l2_norm(s.grid, fields[0].std)}};
  Vector spec1, spec2;
  if (m.approach1) {
    fields.push_back(implied_moment_field(*m.approach1));
    names.insert(names.end(), {"mean_approach1", "std_approach1"});
    spec1 = m.conditional->eigenvalues;
    summary["d_c"] = m.approach1->r();
    summary["approach1"] = {{"retained_fraction", m.approach1->spectrum.sum() / m.conditional->total_variance},
                            {"mean_g_norm", field_l2_norm(s.grid, fields.back().mean)},
                            {"std_g_norm", field_l2_norm(s.grid, fields.back().std)}};
  }
  if (m.approach2) {
    fields.push_back(implied_moment_field(*m.approach2));
    names.insert(names.end(), {"mean_approach2", "std_approach2"});
    spec2 = implied_spectrum(*m.approach2);
    summary["r"] = m.approach2->r();
    summary["approach2"] = {{"mean_g_norm", field_l2_norm(s.grid, fields.back().mean)},
                            {"std_g_norm", field_l2_norm(s.grid, fields.back().std)}};
  }
  std::vector<const Vector*> ptrs;
  for (const auto& f : fields) {
    ptrs.push_back(&f.mean);
    ptrs.push_back(&f.std);
  }
  c.out.csv("condition_g", fields_csv(s.grid, names, ptrs));

  Table spectrum{{"index", "unconditional", "approach1", "approach2"}, {}};
  const Index rows = std::max({m.d, spec1.size(), spec2.size()});
  auto cell = [](const Vector& v, Index i) { return i < v.size() ? format_double(v[i]) : std::string(); };
  for (Index i = 0; i < rows; ++i)
    spectrum.rows.push_back({std::to_string(i + 1), cell(m.head.eigenvalues, i), cell(spec1, i), cell(spec2, i)});
  c.out.csv("spectrum", spectrum.to_csv());
  c.out.summary("condition", summary);
}

std::string moments_csv(const StructuredGrid& grid, const MomentPair& m) {
  return fields_csv(grid, {"mean_g", "std_g", "mean_u", "std_u"}, {&m.g.mean, &m.g.std, &m.u.mean, &m.u.std});
}

void cmd_propagate(Context& c) {
  const Synthesis s = synth_inputs(c);
  Json summary;
  const KernelHyperparams theta = kernel_for(c, s, summary);
  const ModelChoice choice = c.cfg.propagate_model;
  const Models m = c.timed("conditioning", "build_models", [&] {
    return build_models(c.cfg, theta, s.obs, choice == ModelChoice::kApproach1, choice == ModelChoice::kApproach2);
  });
  const ConditionalKLModel& model = choice == ModelChoice::kApproach1   ? *m.approach1
                                    : choice == ModelChoice::kApproach2 ? *m.approach2
                                                                        : m.unconditional;
  const Propagation p = c.timed("uq_propagation", "propagate", [&] { return propagate(c.cfg, model, c.threads); });

  c.stage = {"cli", "write"};
  summary["model"] = to_string(choice);
  summary["r"] = model.r();
  if (p.mc) {
    c.out.csv("propagate_mc", moments_csv(s.grid, p.mc->moments));
    Table conv{{"n", "mean_g", "std_g", "mean_u", "std_u"}, {}};
    for (const auto& cp : p.mc->convergence)
      conv.rows.push_back({std::to_string(cp.n), format_double(cp.mean_g), format_double(cp.std_g),
                           format_double(cp.mean_u), format_double(cp.std_u)});
    c.out.csv("convergence", conv.to_csv());
    summary["mc"] = {{"samples", p.mc->samples},
                     {"seed", c.cfg.mc_seed()},
                     {"g", moment_norms(s.grid, p.mc->moments.g)},
                     {"u", moment_norms(s.grid, p.mc->moments.u)}};
  }
  if (p.collocation) {
    c.out.csv("propagate_collocation", moments_csv(s.grid, p.collocation->moments));
    summary["collocation"] = {{"level", c.cfg.level},
                              {"nodes_solved", p.collocation->nodes_solved},
                              {"clipped_g", p.collocation->clipped_g},
                              {"clipped_u", p.collocation->clipped_u},
                              {"g", moment_norms(s.grid, p.collocation->moments.g)},
                              {"u", moment_norms(s.grid, p.collocation->moments.u)}};
  }
  c.out.summary("propagate", summary);
}

Json error_json(const ApproachError& e) {
  return {{"mean_g", e.mean_g}, {"std_g", e.std_g}, {"mean_u", e.mean_u}, {"std_u", e.std_u}};
}

void cmd_compare(Context& c) {
  const Synthesis s = synth_inputs(c);
  Json summary;
  const KernelHyperparams theta = kernel_for(c, s, summary);
  const Comparison cmp =
      c.timed("uq_propagation", "compare", [&] { return compare_approaches(c.cfg, theta, s.obs, c.threads); });

  c.stage = {"cli", "write"};
  const Vector e1 = cmp.approach1.g.std - cmp.reference.g.std;
  const Vector e2 = cmp.approach2.g.std - cmp.reference.g.std;
  const Vector f1 = cmp.approach1.u.std - cmp.reference.u.std;
  const Vector f2 = cmp.approach2.u.std - cmp.reference.u.std;
  c.out.csv("compare", fields_csv(s.grid,
                                  {"ref_std_g", "std_g_approach1", "std_g_approach2", "ref_std_u", "std_u_approach1",
                                   "std_u_approach2", "err_std_g_approach1", "err_std_g_approach2",
                                   "err_std_u_approach1", "err_std_u_approach2"},
                                  {&cmp.reference.g.std, &cmp.approach1.g.std, &cmp.approach2.g.std,
                                   &cmp.reference.u.std, &cmp.approach1.u.std, &cmp.approach2.u.std, &e1, &e2, &f1,
                                   &f2}));
  summary["d"] = cmp.d;
  summary["d_c_reference"] = cmp.d_c_reference;
  summary["r"] = cmp.r;
  summary["collocation"] = {{"level", c.cfg.level}, {"nodes_solved", cmp.collocation_nodes}, {"clipped_u", cmp.clipped}};
  summary["reference_mc_samples"] = c.cfg.mc_samples;
  summary["errors"] = {{"approach1", error_json(cmp.error1)}, {"approach2", error_json(cmp.error2)}};
  summary["approach1_more_accurate"] = {{"std_g", cmp.error1.std_g < cmp.error2.std_g},
                                        {"std_u", cmp.error1.std_u < cmp.error2.std_u}};
  c.out.summary("compare", summary);
}

std::string campaign_csv(const Campaign& cp) {
  Table t{{"step", "x1", "x2", "value", "d_c", "norm_g", "norm_u", "j_min", "j_max", "j_bound"}, {}};
  for (const auto& s : cp.steps)
    t.rows.push_back({std::to_string(s.step), format_double(s.location.x1), format_double(s.location.x2),
                      format_double(s.value), std::to_string(s.d_c), format_double(s.norm_g),
                      format_double(s.norm_u), format_double(s.j_min), format_double(s.j_max),
                      format_double(s.j_bound)});
  return t.to_csv();
}

bool cmd_learn(Context& c) {
  const Synthesis s = synth_inputs(c);
  Json summary;
  const KernelHyperparams theta = kernel_for(c, s, summary);
  const auto campaigns = c.timed("active_learning", "campaigns", [&] { return learn(c.cfg, theta, s, c.threads); });

  c.stage = {"cli", "write"};
  bool ok = true;
  summary["campaigns"] = Json::array();
  for (const Campaign& cp : campaigns) {
    const std::string name(to_string(cp.method));
    c.out.csv("campaign_" + name, campaign_csv(cp));
    Json j = {{"method", name},
              {"steps_completed", static_cast<long>(cp.steps.size()) - 1},
              {"bound_holds", cp.bound_holds},
              {"error", cp.error ? Json(*cp.error) : Json(nullptr)}};
    if (!cp.steps.empty())
      j["final"] = {{"norm_g", cp.steps.back().norm_g}, {"norm_u", cp.steps.back().norm_u}};
    summary["campaigns"].push_back(j);
    ok = ok && !cp.error;
  }
  c.out.summary("learn", summary);
  if (!ok) {
    c.stage = {"active_learning", "campaign"};
    for (const Campaign& cp : campaigns)
      if (cp.error) throw Error("campaign " + std::string(to_string(cp.method)) + " aborted: " + *cp.error);
  }
  return ok;
}

const std::map<std::string, std::function<void(Context&)>>& commands() {
  static const std::map<std::string, std::function<void(Context&)>> table = {
      {"synth", cmd_synth},       {"fit", cmd_fit},         {"condition", cmd_condition},
      {"propagate", cmd_propagate}, {"compare", cmd_compare}, {"learn", [](Context& c) { cmd_learn(c); }},
  };
  return table;
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const FullyDetermined*>(&e)) return "fully_determined";
  if (dynamic_cast<const IllConditioned*>(&e)) return "ill_conditioned";
  if (dynamic_cast<const SolverFailure*>(&e)) return "solver_failure";
  if (dynamic_cast<const InvalidArgument*>(&e)) return "invalid_argument";
  return "error";
}

}  // namespace

std::vector<std::string> command_names() {
  return {"synth", "fit", "condition", "propagate", "compare", "learn"};
}

ExperimentConfig load_config(const std::string& path_or_preset) {
  if (fs::exists(path_or_preset)) return parse_config(read_text(path_or_preset));
  if (auto p = preset(path_or_preset)) return *p;
  throw ConfigError("config '" + path_or_preset + "' is neither a readable file nor a preset name");
}

fs::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<std::string>& out) {
  if (out) return *out;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return cfg.output;
}

int run_command(const CommandOptions& options, std::ostream& log) {
  Stage stage;
  fs::path dir;
  std::optional<ExperimentConfig> cfg;
  auto report = [&](const std::exception& e, int code) {
    log << "condkl " << options.command << ": " << stage.module << "/" << stage.name << ": " << e.what() << "\n";
    if (dir.empty()) return code;
    try {
      Json j = {{"status", "error"},
                {"command", options.command},
                {"module", stage.module},
                {"stage", stage.name},
                {"type", error_type(e)},
                {"message", e.what()}};
      if (const auto* cfgerr = dynamic_cast<const ConfigError*>(&e); cfgerr && cfgerr->line() > 0)
        j["line"] = cfgerr->line();
      if (const auto* sf = dynamic_cast<const SolverFailure*>(&e)) j["residual"] = sf->residual();
      fs::create_directories(dir);
      write_text(dir / "error.json", j.dump(2) + "\n");
    } catch (...) {
    }
    return code;
  };

  try {
    stage = {"cli", "config"};
    auto it = commands().find(options.command);
    if (it == commands().end()) throw ConfigError("unknown command '" + options.command + "'");
    if (options.threads < 1) throw ConfigError("--threads must be >= 1");
    cfg = load_config(options.config);
    if (options.seed) cfg->seed = *options.seed;
    cfg->validate();
    dir = resolve_output_dir(*cfg, options.out);
    fs::create_directories(dir);
  } catch (const std::exception& e) {
    return report(e, kExitUsage);
  }

  LockFile lock(dir / ".condkl.lock");
  if (!lock.held()) {
    log << "condkl " << options.command << ": output directory " << dir.string()
        << " is locked by another run (remove .condkl.lock if stale)\n";
    return kExitLocked;
  }
  try {
    std::error_code ec;
    fs::remove(dir / "error.json", ec);
    Outputs out(dir, *cfg, options.command);
    Context ctx{*cfg, out, stage, log, options.threads};
    commands().at(options.command)(ctx);
  } catch (const ConfigError& e) {
    return report(e, kExitUsage);
  } catch (const std::exception& e) {
    return report(e, kExitFailure);
  }
  return kExitOk;
}

}  // namespace condkl::app
