#pragma once
// Finite-difference check of the full objective on small random models.
//
// Full mode uses a plain reverse edge and differentiates through the graph
// loss stage weights, so central differences of the objective apply directly.
// Detached mode keeps the defaults (truncated edge, detached stage weights);
// the differences are then taken with the detached quantities held at their
// base values, which is the function the analytic gradient differentiates.

#include <cstddef>
#include <cstdint>
#include <string>

#include "dingdate/losses.hpp"
#include "json.hpp"

namespace dingdate {

enum class GradcheckMode { Full, Detached };

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t instances = 60;
  GradcheckMode mode = GradcheckMode::Detached;
  double step = 1e-4;
  double rel_tol = 1e-4;
  double abs_tol = 1e-6;
  std::size_t batch = 3;
  std::size_t feature_dim = 5;
  std::size_t hidden_dim = 4;
  /// Default hyperparameters except beta, raised so the attribute stages carry
  /// gradients well above the absolute tolerance.
  Hyperparams hyper{2.0, 3.0, 0.5, 0.1, 2.0, 0.25};
};

struct GradcheckReport {
  GradcheckMode mode = GradcheckMode::Detached;
  std::size_t instances = 0;
  std::size_t entries = 0;   // gradient entries compared
  std::size_t failures = 0;  // entries outside both tolerances
  double max_rel_error = 0.0;  // over entries of magnitude >= 1e-4
  double max_abs_error = 0.0;

  bool passed() const noexcept { return failures == 0 && instances > 0; }
  nlohmann::json to_json() const;
};

GradcheckReport gradcheck(const GradcheckOptions& options);

}  // namespace dingdate
