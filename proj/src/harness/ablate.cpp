#include "cpr/harness/ablate.hpp"

#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>

namespace cpr::harness {

std::string Combo::name() const {
  std::string out;
  auto add = [&out](bool on, const char* part) {
    if (on) out += (out.empty() ? "" : "+") + std::string(part);
  };
  add(local, "local");
  add(global, "global");
  add(recon, "recon");
  add(hard, "hard");
  return out;
}

Combo parse_combo(const std::string& text) {
  Combo c;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, '+')) {
    if (part == "local") {
      c.local = true;
    } else if (part == "global") {
      c.global = true;
    } else if (part == "recon") {
      c.recon = true;
    } else if (part == "hard") {
      c.hard = true;
    } else {
      throw ConfigError("unknown toggle '" + part + "' in combo '" + text +
                        "' (expected local, global, recon, hard)");
    }
  }
  if (!c.local && !c.global && !c.recon) {
    throw ConfigError("combo '" + text + "' enables no loss");
  }
  if (c.hard && !c.local) throw ConfigError("combo '" + text + "': hard negatives need local");
  return c;
}

std::vector<Combo> parse_combos(const std::string& list, std::vector<std::string>* warnings) {
  std::vector<Combo> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const Combo c = parse_combo(item);
    if (std::find(out.begin(), out.end(), c) != out.end()) {
      if (warnings) warnings->push_back("duplicate combo '" + item + "' (" + c.name() + ") dropped");
      continue;
    }
    out.push_back(c);
  }
  if (out.empty()) throw ConfigError("no combos given");
  return out;
}

RunConfig apply_combo(const RunConfig& base, const Combo& combo) {
  RunConfig cfg = base;
  auto& t = cfg.model.toggles;
  t.local_on = combo.local;
  t.global_on = combo.global;
  t.recon_on = combo.recon;
  t.hard_negatives_on = combo.hard;
  cfg.validate();
  return cfg;
}

std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<Combo>& combos,
                                const Dataset& data, const std::string& out_dir,
                                std::ostream* log) {
  std::vector<RunConfig> configs;
  for (const auto& c : combos) configs.push_back(apply_combo(base, c));
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < combos.size(); ++i) {
    const std::string dir =
        out_dir.empty() ? "" : (std::filesystem::path(out_dir) / combos[i].name()).string();
    if (log) *log << "== " << combos[i].name() << "\n";
    const auto run = pretrain(configs[i], data.train, dir, nullptr);
    AblationRow row;
    row.combo = combos[i];
    row.final_loss = run.rows.empty() ? 0.0 : run.rows.back().total;
    row.probe = linear_probe(run.params, configs[i], data.train, data.val);
    if (log) *log << "   probe val accuracy " << row.probe.val_accuracy << "\n";
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "combo,local_on,global_on,recon_on,hard_negatives_on,final_L_total,probe_val_acc\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%d,%.9g,%.9g\n", r.combo.name().c_str(),
                  r.combo.local, r.combo.global, r.combo.recon, r.combo.hard, r.final_loss,
                  r.probe.val_accuracy);
    out += buf;
  }
  return out;
}

}  // namespace cpr::harness
