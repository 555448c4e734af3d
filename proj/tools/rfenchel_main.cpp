#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rfenchel/asymptotics.hpp"
#include "rfenchel/duality.hpp"
#include "rfenchel/scenario.hpp"

namespace {

using namespace rfenchel;

constexpr int kExitOk = 0;
constexpr int kExitSchema = 2;
constexpr int kExitSolver = 3;

Json config_json(const SolverConfig& c) {
  Json j;
  j["grid_radius"] = c.grid_radius;
  j["grid_points"] = c.grid_points;
  j["grid_levels"] = c.grid_levels;
  j["tolerance"] = c.tolerance;
  j["seed"] = c.seed;
  j["truncation"] = c.truncation;
  return j;
}

void emit(const Json& report, const std::string& table, const std::string& out_path) {
  std::cout << table;
  std::cout << "--- json ---\n" << report.dump(2) << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << report.dump(2) << "\n";
  }
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

GridSpec grid_of(const SolverConfig& c) {
  GridSpec g;
  g.radius = c.grid_radius;
  g.base_points = c.grid_points;
  g.levels = c.grid_levels;
  return g;
}

void require(bool cond, const std::string& what) {
  if (!cond) throw ScenarioError(what);
}

int cmd_eval(const Scenario& sc, const std::string& out_path) {
  require(sc.integrand && sc.penalty && !sc.xis.empty(),
          "eval needs integrand, penalty and xis");
  Json rows = Json::array();
  std::ostringstream tb;
  tb << pad("idx", 5) << pad("I_f_gamma", 18) << pad("rho_gamma", 18)
     << pad("gauge_norm", 18) << "\n";
  for (std::size_t i = 0; i < sc.xis.size(); ++i) {
    const auto& xi = sc.xis[i];
    const ExtReal I = I_f_gamma(*sc.integrand, *sc.penalty, xi);
    const double rho = rho_gamma(*sc.penalty, xi);
    const double gauge = gauge_norm(*sc.penalty, xi);
    Json r;
    r["idx"] = i;
    r["I"] = format_ext(I);
    r["rho"] = format_num(rho);
    r["gauge"] = format_num(gauge);
    rows.push_back(r);
    tb << pad(std::to_string(i), 5) << pad(format_ext(I), 18)
       << pad(format_num(rho), 18) << pad(format_num(gauge), 18) << "\n";
  }
  Json rep;
  rep["command"] = "eval";
  rep["config"] = config_json(sc.config);
  rep["rows"] = rows;
  emit(rep, tb.str(), out_path);
  return kExitOk;
}

int cmd_conjugate(const Scenario& sc, const std::string& out_path) {
  require(sc.integrand && sc.penalty && !sc.etas.empty(),
          "conjugate needs integrand, penalty and etas");
  Json rows = Json::array();
  std::ostringstream tb;
  tb << pad("idx", 5) << pad("H_solver", 18) << pad("grid_sup", 18)
     << pad("discrepancy", 18) << pad("monotone", 10) << "\n";
  bool solver_trouble = false;
  for (std::size_t i = 0; i < sc.etas.size(); ++i) {
    const ConjugateCheck c =
        conjugate_on_L1(*sc.integrand, *sc.penalty, sc.etas[i], grid_of(sc.config));
    bool monotone = true;
    for (std::size_t l = 1; l < c.level_bounds.size(); ++l)
      if (c.level_bounds[l] < c.level_bounds[l - 1] - 1e-12) monotone = false;
    const double disc = c.h.value.is_pos_inf() ? kInf : c.h.value.value() - c.brute;
    if (!c.h.converged) solver_trouble = true;
    Json r;
    r["idx"] = i;
    r["H"] = format_ext(c.h.value);
    r["H_gap_certificate"] = format_num(c.h.gap);
    r["grid_sup"] = format_num(c.brute);
    r["levels"] = c.level_bounds;
    r["discrepancy"] = format_num(disc);
    r["monotone"] = monotone;
    rows.push_back(r);
    tb << pad(std::to_string(i), 5) << pad(format_ext(c.h.value), 18)
       << pad(format_num(c.brute), 18) << pad(format_num(disc), 18)
       << pad(monotone ? "yes" : "no", 10) << "\n";
  }
  Json rep;
  rep["command"] = "conjugate";
  rep["config"] = config_json(sc.config);
  rep["rows"] = rows;
  emit(rep, tb.str(), out_path);
  return solver_trouble ? kExitSolver : kExitOk;
}

Json duality_report_json(const DualityReport& r) {
  Json j;
  j["primal"] = format_ext(r.primal_value);
  j["dual"] = format_ext(r.dual_value);
  j["gap"] = format_num(r.gap);
  j["dual_feasible"] = r.dual_feasible;
  j["both_infinite"] = r.both_infinite;
  j["unbounded"] = r.unbounded;
  if (r.primal_point) j["primal_point"] = r.primal_point->values();
  if (r.dual_eta) j["dual_eta"] = r.dual_eta->values();
  if (r.attained_q) j["attained_q"] = r.attained_q->values();
  j["diagnostics"] = r.diagnostics;
  return j;
}

int cmd_duality(const Scenario& sc, const std::string& out_path) {
  require(sc.penalty && sc.cone, "duality needs penalty and cone");
  DualityReport rep;
  std::string mode;
  if (sc.utility) {
    mode = "robust_utility";
    rep = robust_utility_solve(*sc.utility, *sc.penalty, *sc.cone);
  } else {
    require(static_cast<bool>(sc.integrand), "duality needs an integrand or a utility");
    mode = "fenchel";
    rep = fenchel_solve(*sc.integrand, *sc.penalty, *sc.cone);
  }
  std::ostringstream tb;
  tb << pad("mode", 16) << pad("primal", 18) << pad("dual", 18) << pad("gap", 14)
     << pad("flags", 24) << "\n";
  std::string flags;
  if (rep.unbounded) flags += "unbounded ";
  if (rep.both_infinite) flags += "both-inf ";
  if (!rep.dual_feasible) flags += "dual-infeasible";
  tb << pad(mode, 16) << pad(format_ext(rep.primal_value), 18)
     << pad(format_ext(rep.dual_value), 18) << pad(format_num(rep.gap), 14)
     << pad(flags.empty() ? "ok" : flags, 24) << "\n";
  Json j;
  j["command"] = "duality";
  j["mode"] = mode;
  j["config"] = config_json(sc.config);
  j["report"] = duality_report_json(rep);
  emit(j, tb.str(), out_path);
  const bool bad = !rep.unbounded && !rep.both_infinite &&
                   !(rep.gap <= 1e-5 || rep.gap == kInf);
  return bad ? kExitSolver : kExitOk;
}

int cmd_battery(const Scenario& sc, const std::string& out_path) {
  require(sc.integrand && sc.penalty, "battery needs integrand and penalty");
  BatteryConfig cfg;
  cfg.seed = sc.config.seed;
  cfg.tol = std::max(sc.config.tolerance, 1e-6);
  const BatteryReport rep = regularity_battery(*sc.integrand, *sc.penalty, cfg);
  const IntegrabilityReport ir = integrability_report(*sc.integrand, *sc.penalty);
  std::ostringstream tb;
  tb << pad("test", 26) << pad("result", 8) << "\n";
  auto row = [&tb](const char* name, bool v) {
    tb << pad(name, 26) << pad(v ? "pass" : "FAIL", 8) << "\n";
  };
  row("dom_I_full (pre)", rep.dom_full);
  row("gauge_finite", rep.gauge_finite);
  row("sublevel_compact", rep.sublevel_compact);
  row("lebesgue", rep.lebesgue);
  row("attained", rep.attained);
  row("consistent", rep.consistent);
  row("integ_robust1", ir.integ_robust1);
  row("as_conj_integ1", ir.as_conj_integ1);
  row("integrability_d", ir.integrability_d);
  row("add_ass_neg_part", ir.add_ass_neg_part);
  Json j;
  j["command"] = "battery";
  j["config"] = config_json(sc.config);
  j["battery"] = {{"dom_full", rep.dom_full},
                  {"gauge_finite", rep.gauge_finite},
                  {"sublevel_compact", rep.sublevel_compact},
                  {"lebesgue", rep.lebesgue},
                  {"attained", rep.attained},
                  {"consistent", rep.consistent},
                  {"details", rep.details}};
  j["integrability"] = {{"integ_robust1", ir.integ_robust1},
                        {"as_conj_integ1", ir.as_conj_integ1},
                        {"integrability_d", ir.integrability_d},
                        {"add_ass_neg_part", ir.add_ass_neg_part},
                        {"eta_m_rho", ir.eta_m_rho},
                        {"note", ir.note}};
  emit(j, tb.str(), out_path);
  return (rep.dom_full && !rep.consistent) ? kExitSolver : kExitOk;
}

int cmd_counterexample(const Scenario& sc, const std::string& out_path) {
  using namespace seqmodel;
  const SequenceModel model(sc.config.truncation);
  std::ostringstream tb, csv;
  Json j;
  j["command"] = "counterexample";
  j["config"] = config_json(sc.config);

  tb << pad("w", 10) << pad("closed_form", 16) << pad("lower", 16) << pad("upper", 16)
     << pad("bracket", 12) << "\n";
  csv << "w,closed_form,lower,upper,gap\n";
  Json wrows = Json::array();
  for (double w : sc.config.w_grid) {
    const TruncationCheck c =
        singular_conjugate_truncation_check(w, sc.config.truncation);
    const double gap = c.upper - c.lower;
    tb << pad(format_num(w), 10) << pad(format_num(c.closed_form), 16)
       << pad(format_num(c.lower), 16) << pad(format_num(c.upper), 16)
       << pad(format_num(gap), 12) << "\n";
    csv << format_num(w) << "," << format_num(c.closed_form) << ","
        << format_num(c.lower) << "," << format_num(c.upper) << ","
        << format_num(gap) << "\n";
    wrows.push_back({{"w", w},
                     {"closed_form", c.closed_form},
                     {"lower", c.lower},
                     {"upper", c.upper}});
  }
  j["singular_conjugate"] = wrows;

  // Rule corpus for the D_{f,gamma} membership table.
  std::vector<SequenceRule> corpus = {
      SequenceRule::constant(0.0),
      SequenceRule::constant(1.0),
      SequenceRule::constant(-0.5),
      SequenceRule::prefixed({2.0, 1.5, 0.5}, 0.0),
      SequenceRule::prefixed({1.0}, -1.0),
      SequenceRule::periodic({}, {0.0, 1.0}),
      SequenceRule::periodic({0.5}, {-1.0, -0.25}),
      SequenceRule::formula(SequenceRule::Tail::InvN, 2.0),
  };
  tb << "\n" << pad("rule", 26) << pad("limsup", 12) << pad("in_D", 8)
     << pad("tail_limit", 14) << pad("limsup_h", 14) << "\n";
  csv << "\nrule,limsup,in_D,tail_limit,limsup_h\n";
  Json drows = Json::array();
  for (const auto& rule : corpus) {
    const bool member = D_membership(model, rule);
    const TailLimitCheck chk = tail_limit_check(model, rule);
    tb << pad(rule.describe(), 26) << pad(format_num(rule.limsup()), 12)
       << pad(member ? "yes" : "no", 8) << pad(format_num(chk.limit_estimate), 14)
       << pad(format_num(chk.rule_limsup_h), 14) << "\n";
    csv << rule.describe() << "," << format_num(rule.limsup()) << ","
        << (member ? 1 : 0) << "," << format_num(chk.limit_estimate) << ","
        << format_num(chk.rule_limsup_h) << "\n";
    drows.push_back({{"rule", rule.describe()},
                     {"limsup", rule.limsup()},
                     {"in_D", member},
                     {"tail_limit", chk.limit_estimate},
                     {"limsup_h", chk.rule_limsup_h}});
  }
  j["d_membership"] = drows;
  j["csv"] = csv.str();
  emit(j, tb.str(), out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rfenchel: robust convex integral functionals and their duality"};
  app.require_subcommand(1);

  std::string scenario_path, out_path;
  std::uint64_t seed = 0;
  bool seed_given = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    cmd->add_option("--out", out_path, "write the JSON report here");
    cmd->add_option("--seed", seed, "override the scenario seed")
        ->each([&](const std::string&) { seed_given = true; });
    return cmd;
  };

  auto* eval_cmd = add_common(app.add_subcommand("eval", "I_{f,gamma}, rho and gauge norms"));
  auto* conj_cmd = add_common(app.add_subcommand("conjugate", "grid-vs-solver conjugate check"));
  auto* dual_cmd = add_common(app.add_subcommand("duality", "Fenchel / robust-utility duality"));
  auto* batt_cmd = add_common(app.add_subcommand("battery", "regularity property battery"));
  auto* ctr_cmd = add_common(app.add_subcommand("counterexample", "sequence-space diagnostics"));

  CLI11_PARSE(app, argc, argv);

  try {
    Scenario sc = load_scenario_file(scenario_path);
    if (seed_given) sc.config.seed = seed;
    if (eval_cmd->parsed()) return cmd_eval(sc, out_path);
    if (conj_cmd->parsed()) return cmd_conjugate(sc, out_path);
    if (dual_cmd->parsed()) return cmd_duality(sc, out_path);
    if (batt_cmd->parsed()) return cmd_battery(sc, out_path);
    if (ctr_cmd->parsed()) return cmd_counterexample(sc, out_path);
  } catch (const ScenarioError& e) {
    Json err;
    err["error"] = {{"kind", "schema"}, {"message", e.what()}};
    std::cout << err.dump(2) << "\n";
    return kExitSchema;
  } catch (const std::exception& e) {
    Json err;
    err["error"] = {{"kind", "solver"}, {"message", e.what()}};
    std::cout << err.dump(2) << "\n";
    return kExitSolver;
  }
  return kExitOk;
}
