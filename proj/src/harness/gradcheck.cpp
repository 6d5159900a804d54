#include "cpr/harness/gradcheck.hpp"

#include <cstdio>
#include <ostream>

#include "cpr/core/graph.hpp"
#include "cpr/data/synthetic.hpp"
#include "cpr/model/model.hpp"

namespace cpr::harness {

namespace {

constexpr int kMicroClasses[2] = {0, 2};

struct CorruptGuard {
  explicit CorruptGuard(const std::string& op) { core::testing::set_corrupted_op(op); }
  ~CorruptGuard() { core::testing::set_corrupted_op(""); }
};

template <typename T>
core::MultiExpr<T> loss_terms(const model::PreparedBatch<T>& batch, const model::ModelConfig& cfg) {
  return [&batch, &cfg](core::ParamScope<T>& scope) {
    const auto terms = model::compute_losses(batch, scope, cfg);
    std::vector<core::Var<T>> out;
    for (const auto& t : {terms.local, terms.global, terms.recon}) {
      if (t) out.push_back(*t);
    }
    out.push_back(terms.total);
    return out;
  };
}

}  // namespace

std::vector<GradcheckComponent> run_gradcheck(const GradcheckOptions& opts,
                                              const model::ModelConfig& cfg) {
  cfg.validate();
  std::vector<core::Tensor<double>> seqs;
  std::vector<core::Tensor<long double>> seqs_precise;
  for (int c : kMicroClasses) {
    const auto seq = data::generate_synthetic({c, data::ShapeKind::TwoBlob, 1.0, 0.01, opts.seed},
                                              cfg.T, cfg.N);
    seqs.push_back(seq.frames.cast<double>());
    seqs_precise.push_back(seq.frames.cast<long double>());
  }
  const auto batch = model::prepare_batch(seqs, cfg);
  const auto batch_precise = model::prepare_batch(seqs_precise, cfg);
  const auto params = model::init_params(cfg, opts.seed).cast<double>();

  CorruptGuard guard(opts.corrupt_op);
  const auto reports = core::finite_difference_check(
      loss_terms(batch, cfg), loss_terms(batch_precise, cfg), params,
      core::FiniteDifferenceOptions{opts.eps, opts.order});

  std::vector<std::string> names;
  if (cfg.toggles.local_on) names.push_back("L_l");
  if (cfg.toggles.global_on) names.push_back("L_g");
  if (cfg.toggles.recon_on) names.push_back("d_recon");
  names.push_back("L_total");
  std::vector<GradcheckComponent> out;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out.push_back({names[i], reports[i], reports[i].max_rel_error < opts.threshold});
  }
  return out;
}

bool print_gradcheck(const std::vector<GradcheckComponent>& parts, const GradcheckOptions& opts,
                     std::ostream& out) {
  bool ok = true;
  char buf[320];
  for (const auto& p : parts) {
    const auto& r = p.report;
    std::snprintf(buf, sizeof buf,
                  "%-8s %s max_rel_error=%.3e worst=%s[%zu] analytic=%.9e numeric=%.9e "
                  "checked=%zu kinked=%zu precise=%zu",
                  p.name.c_str(), p.passed ? "ok  " : "FAIL", r.max_rel_error, r.worst_name.c_str(),
                  r.worst_index, r.worst_analytic, r.worst_numeric, r.checked, r.kink_reprobes,
                  r.precise_reprobes);
    out << buf << "\n";
    ok = ok && p.passed;
  }
  if (!ok && !opts.corrupt_op.empty()) {
    out << "backward rule of op '" << opts.corrupt_op << "' was corrupted\n";
  }
  return ok;
}

}  // namespace cpr::harness
