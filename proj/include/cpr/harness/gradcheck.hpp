#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cpr/core/autodiff.hpp"
#include "cpr/model/config.hpp"

namespace cpr::harness {

struct GradcheckOptions {
  std::uint64_t seed = 1;
  double eps = 1e-3;
  int order = 4;
  double threshold = 1e-4;
  /// Test fixture: scale the backward rule of this op (see
  /// core::testing::set_corrupted_op). Empty leaves every rule intact.
  std::string corrupt_op;
};

struct GradcheckComponent {
  std::string name;  // L_l, L_g, d_recon, L_total
  core::GradCheckReport report;
  bool passed = false;
};

/// Two synthetic micro sequences (different motion classes) at the micro
/// config, every loss term and the total checked against finite differences
/// over all trainable parameters in double precision.
std::vector<GradcheckComponent> run_gradcheck(const GradcheckOptions& opts,
                                              const model::ModelConfig& cfg = model::micro_config());

/// One line per component; returns true when all pass.
bool print_gradcheck(const std::vector<GradcheckComponent>& parts, const GradcheckOptions& opts,
                     std::ostream& out);

}  // namespace cpr::harness
