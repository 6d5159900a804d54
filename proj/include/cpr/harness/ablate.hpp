#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cpr/harness/pretrain.hpp"
#include "cpr/harness/probe.hpp"

namespace cpr::harness {

/// A set of enabled loss terms, written as '+'-joined names from
/// {local, global, recon, hard}, e.g. "local+global+recon+hard".
struct Combo {
  bool local = false;
  bool global = false;
  bool recon = false;
  bool hard = false;

  std::string name() const;  // canonical order
  bool operator==(const Combo&) const = default;
};

Combo parse_combo(const std::string& text);

/// Comma-separated combos. Repeats (after canonicalization) are dropped and
/// reported through `warnings`.
std::vector<Combo> parse_combos(const std::string& list, std::vector<std::string>* warnings = nullptr);

/// `base` with the combo's toggles; colorize and cross-batch settings stay.
RunConfig apply_combo(const RunConfig& base, const Combo& combo);

struct AblationRow {
  Combo combo;
  double final_loss = 0;
  ProbeResult probe;
};

/// Pretrain and probe every combo with the same seed and data. When out_dir
/// is set, each run writes into out_dir/<combo name>.
std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<Combo>& combos,
                                const Dataset& data, const std::string& out_dir = "",
                                std::ostream* log = nullptr);

std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace cpr::harness
