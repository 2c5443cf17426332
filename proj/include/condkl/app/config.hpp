#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "condkl/active_learning.hpp"
#include "condkl/error.hpp"
#include "condkl/kernel_gp.hpp"

namespace condkl::app {

/// Config or command-line problem; carries the offending line when known.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

enum class ApproachSelection { kApproach1, kApproach2, kBoth };
enum class PropagationMethod { kMonteCarlo, kCollocation, kBoth };
enum class ModelChoice { kUnconditional, kApproach1, kApproach2 };

struct ExperimentConfig {
  // [domain] / [grid]
  double lx = 2.0;
  double ly = 1.0;
  int nx = 120;
  int ny = 60;

  // [kernel]; sigma = 0 is accepted by synth only
  KernelHyperparams kernel{0.65, 0.15, 0.2, 0.0, LengthScaleConvention::kRbf};
  bool fit_kernel = false;
  int fit_starts = 8;

  // [reference] / [observations]; seeds default to values derived from [run] seed
  std::optional<std::uint64_t> reference_seed;
  int n_obs = 40;
  std::optional<std::uint64_t> observation_seed;

  // [model]
  ApproachSelection approach = ApproachSelection::kBoth;
  double fraction = 0.99;
  int d = 0;    ///< unconditional truncation; 0 selects the fraction rule
  int d_c = 0;  ///< Approach 1 truncation; 0 selects the fraction rule
  int compare_r = 0;  ///< comparison dimension; 0 uses the Approach 2 rank

  // [propagation]
  ModelChoice propagate_model = ModelChoice::kApproach1;
  PropagationMethod propagation = PropagationMethod::kMonteCarlo;
  long mc_samples = 2000;
  int level = 3;
  std::vector<long> checkpoints;

  // [active_learning]
  std::vector<AcquisitionMethod> learn_methods{AcquisitionMethod::kMethod1, AcquisitionMethod::kMethod2};
  int n_am = 10;
  long ensemble = 200;
  long learn_samples = 1000;

  // [run]
  std::uint64_t seed = 0;
  std::string output = "out";

  std::uint64_t reference_seed_value() const;
  std::uint64_t observation_seed_value() const;
  std::uint64_t mc_seed() const;
  std::uint64_t learn_seed() const;
  std::uint64_t fit_seed() const;

  /// Range checks; throws ConfigError.
  void validate() const;
};

/// Parses "[section]" / "key = value" text. Unknown sections or keys,
/// duplicates and malformed values are rejected with their line number.
ExperimentConfig parse_config(const std::string& text);

/// Built-in presets by name, or nullopt.
std::optional<ExperimentConfig> preset(const std::string& name);
std::vector<std::string> preset_names();

/// Canonical "section.key = value" listing of every result-affecting field
/// (all but run.output), in a fixed order.
std::string canonical_text(const ExperimentConfig& cfg);

/// 64-bit FNV-1a of canonical_text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

std::string to_string(ApproachSelection a);
std::string to_string(PropagationMethod p);
std::string to_string(ModelChoice m);

}  // namespace condkl::app
