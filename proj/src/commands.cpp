#include "robhedge/commands.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "robhedge/dual.hpp"
#include "robhedge/oracle.hpp"
#include "robhedge/primal.hpp"
#include "robhedge/risk.hpp"

namespace robhedge {

namespace {

using ojson = nlohmann::ordered_json;

// JSON has no infinities; they are written as strings.
ojson num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

ojson nums(std::span<const double> v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

ojson tolerances_json(const Tolerances& t) {
  ojson o;
  o["solver"] = t.solver;
  o["max_iterations"] = t.max_iterations;
  o["gap_weak"] = t.gap_weak;
  o["gap_strong"] = t.gap_strong;
  o["gap_lp"] = t.gap_lp;
  o["martingale"] = t.martingale;
  return o;
}

PrimalOptions primal_options(const Tolerances& t) { return {t.solver, t.max_iterations}; }
PenalizedOptions dual_options(const Tolerances& t) { return {t.solver, t.max_iterations}; }

ojson header(const Instance& inst, std::string_view command) {
  ojson o;
  o["format"] = kInstanceFormat;
  o["command"] = std::string(command);
  if (!inst.doc().name.empty()) o["name"] = inst.doc().name;
  o["loss"] = inst.loss().name();
  if (inst.floor()) o["floor_c"] = *inst.floor();
  return o;
}

ojson strategy_json(const ScenarioTree& tree, const Strategy& z) {
  ojson a = ojson::array();
  for (int node : tree.internal_nodes()) {
    ojson o;
    o["node"] = node;
    o["time"] = tree.time(node);
    o["position"] = nums(z.at(tree.internal_index(node)));
    a.push_back(std::move(o));
  }
  return a;
}

ojson primal_json(const ScenarioTree& tree, const PrimalSolution& s) {
  ojson o;
  o["status"] = to_string(s.status);
  o["price"] = num(s.price);
  o["lower_bound"] = num(s.lower_bound);
  o["shortfall_risk"] = num(s.shortfall_risk);
  o["iterations"] = s.iterations;
  if (s.status != SolveStatus::nonviable) {
    o["strategy"] = strategy_json(tree, s.strategy);
    o["shortfall"] = nums(s.shortfall);
  }
  return o;
}

ojson dual_json(const DualSolution& d) {
  ojson o;
  o["status"] = to_string(d.status);
  o["value"] = num(d.value);
  o["expectation"] = num(d.expectation);
  o["penalty"] = num(d.penalty);
  o["iterations"] = d.iterations;
  if (!d.q.empty()) {
    o["q"] = nums(d.q);
    o["mixture"] = nums(d.mixture);
    o["reference"] = d.reference;
  }
  if (!d.node_multipliers.empty()) {
    o["floor_cost"] = num(d.floor_cost);
    o["node_multipliers"] = nums(d.node_multipliers);
  }
  return o;
}

// Worst outcome over solver statuses: nonviable dominates, then limits.
Outcome outcome_of(std::initializer_list<SolveStatus> statuses) {
  bool limit = false;
  for (SolveStatus s : statuses) {
    if (s == SolveStatus::nonviable) return Outcome::nonviable;
    limit = limit || s == SolveStatus::iteration_limit;
  }
  return limit ? Outcome::solver_failure : Outcome::success;
}

CommandReport finish(ojson report, Outcome outcome) {
  ojson out;
  out["format"] = report["format"];
  out["command"] = report["command"];
  out["outcome"] = to_string(outcome);
  for (auto it = report.begin(); it != report.end(); ++it)
    if (it.key() != "format" && it.key() != "command") out[it.key()] = it.value();
  return {outcome, out.dump(2) + "\n"};
}

CommandReport cmd_price(const Instance& inst) {
  const auto& tree = inst.tree();
  const auto& pset = inst.measures();
  const auto& x = inst.claim();
  const auto tol = inst.tolerances();
  ojson r = header(inst, "price");
  const auto phi = superhedge_price(tree, pset, x);
  const auto psi = accept_price(tree, pset, x, inst.loss(), primal_options(tol));
  std::optional<PrimalSolution> psi_c;
  if (inst.floor()) psi_c = accept_price_bounded(tree, pset, x, inst.loss(), *inst.floor(), primal_options(tol));

  const auto& shown = psi_c ? *psi_c : psi;
  SolveStatus status = shown.status;
  if (psi.status == SolveStatus::nonviable || phi.status == SolveStatus::nonviable) status = SolveStatus::nonviable;
  r["status"] = to_string(status);
  r["phi"] = num(phi.price);
  r["psi"] = num(psi.price);
  if (psi_c) r["psi_c"] = num(psi_c->price);
  if (shown.status != SolveStatus::nonviable) {
    r["strategy"] = strategy_json(tree, shown.strategy);
    r["shortfall"] = nums(shown.shortfall);
  }
  ojson solves;
  solves["phi"] = primal_json(tree, phi);
  solves["psi"] = primal_json(tree, psi);
  if (psi_c) solves["psi_c"] = primal_json(tree, *psi_c);
  r["solves"] = std::move(solves);
  ojson it;
  it["phi"] = phi.iterations;
  it["psi"] = psi.iterations;
  if (psi_c) it["psi_c"] = psi_c->iterations;
  r["iterations"] = std::move(it);
  r["tolerances"] = tolerances_json(tol);
  const Outcome o = psi_c ? outcome_of({phi.status, psi.status, psi_c->status}) : outcome_of({phi.status, psi.status});
  return finish(std::move(r), o);
}

CommandReport cmd_dual(const Instance& inst) {
  const auto& tree = inst.tree();
  const auto& pset = inst.measures();
  const auto& x = inst.claim();
  const auto tol = inst.tolerances();
  ojson r = header(inst, "dual");
  const auto sup = superhedge_dual(tree, pset, x);
  const auto d = inst.floor() ? dual_price_bounded(tree, pset, x, inst.loss(), *inst.floor(), dual_options(tol))
                              : dual_price(tree, pset, x, inst.loss(), dual_options(tol));
  SolveStatus status = d.status;
  if (sup.status == SolveStatus::nonviable) status = SolveStatus::nonviable;
  r["status"] = to_string(status);
  r["dual_value"] = num(d.value);
  r["superhedge_dual_value"] = num(sup.value);
  r["dual"] = dual_json(d);
  r["superhedge_dual"] = dual_json(sup);
  ojson it;
  it["dual"] = d.iterations;
  it["superhedge_dual"] = sup.iterations;
  r["iterations"] = std::move(it);
  r["tolerances"] = tolerances_json(tol);
  return finish(std::move(r), outcome_of({sup.status, d.status}));
}

// Leaf probabilities of the reference mixture attaining the penalty.
Vec mixture_measure(const ReferenceMeasureSet& pset, const Vec& weights) {
  const auto& probs = pset.leaf_probabilities();
  Vec p(probs.front().size(), 0.0);
  for (std::size_t k = 0; k < weights.size() && k < probs.size(); ++k)
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += weights[k] * probs[k][i];
  return p;
}

CommandReport cmd_verify(const Instance& inst) {
  const auto& tree = inst.tree();
  const auto& pset = inst.measures();
  const auto& x = inst.claim();
  const auto tol = inst.tolerances();
  const DualityTolerances dt{tol.gap_weak, tol.gap_strong, tol.gap_lp, tol.martingale};
  ojson r = header(inst, "verify");
  const auto rep = duality_report(tree, pset, x, inst.loss(), inst.floor(), primal_options(tol), dual_options(tol), dt);
  auto certs = rep.certificates;

  // psi <= phi and, with a floor, psi <= psi_c <= phi(c).
  const auto phi = superhedge_price(tree, pset, x);
  std::optional<PrimalSolution> psi;
  if (inst.floor()) psi = accept_price(tree, pset, x, inst.loss(), primal_options(tol));
  if (rep.status != SolveStatus::nonviable && phi.status != SolveStatus::nonviable) {
    const double base = psi ? psi->price : rep.primal.price;
    const double slack = 1e-8 * std::max(1.0, std::abs(phi.price));
    certs.push_back({"psi_le_phi", base <= phi.price + slack, base - phi.price, slack});
    if (psi) {
      const double s2 = 1e-8 * std::max(1.0, std::abs(base));
      certs.push_back({"psi_le_psi_c", base <= rep.primal.price + s2, base - rep.primal.price, s2});
      const auto phi_c = superhedge_price(tree, pset, x, *inst.floor());
      const double s3 = 1e-8 * std::max(1.0, std::abs(phi_c.price));
      certs.push_back({"psi_c_le_phi_c", rep.primal.price <= phi_c.price + s3, rep.primal.price - phi_c.price, s3});
    }
  }

  bool all = true;
  for (const auto& c : certs) all = all && c.passed;
  r["status"] = to_string(rep.status);
  r["primal_value"] = num(rep.primal.price);
  r["dual_value"] = num(rep.dual.value);
  r["gap"] = num(rep.gap);
  if (!rep.dual.q.empty()) {
    r["certificate_q"] = nums(rep.dual.q);
    r["chosen_p"] = nums(mixture_measure(pset, rep.dual.mixture));
    r["mixture"] = nums(rep.dual.mixture);
    r["reference"] = rep.dual.reference;
  }
  ojson inv = ojson::array();
  for (const auto& c : certs) {
    ojson o;
    o["name"] = c.name;
    o["passed"] = c.passed;
    o["value"] = num(c.value);
    o["tolerance"] = num(c.tolerance);
    inv.push_back(std::move(o));
  }
  r["invariants"] = std::move(inv);
  r["all_pass"] = all;
  r["primal"] = primal_json(tree, rep.primal);
  r["dual"] = dual_json(rep.dual);
  ojson it;
  it["primal"] = rep.primal.iterations;
  it["dual"] = rep.dual.iterations;
  r["iterations"] = std::move(it);
  r["tolerances"] = tolerances_json(tol);
  Outcome o = Outcome::success;
  if (rep.status == SolveStatus::nonviable)
    o = Outcome::nonviable;
  else if (!all || rep.status == SolveStatus::iteration_limit)
    o = Outcome::solver_failure;
  return finish(std::move(r), o);
}

CommandReport cmd_risk(const Instance& inst) {
  const auto& pset = inst.measures();
  const auto& x = inst.position();
  const auto& probs = pset.leaf_probabilities();
  const auto& loss = inst.loss();
  ojson r = header(inst, "risk");
  r["position"] = nums(x);
  ojson per = ojson::array();
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const auto res = oce(probs[k], x, loss);
    ojson o;
    o["measure"] = k;
    o["value"] = num(res.value);
    o["m_star"] = num(res.m_star);
    per.push_back(std::move(o));
  }
  r["oce"] = std::move(per);
  const auto rob = robust_oce(probs, x, loss);
  r["robust_oce"] = num(rob.value);
  r["m_star"] = num(rob.m_star);
  r["worst"] = rob.worst;
  const auto d = dual_oce(probs, x, loss);
  ojson dj;
  dj["value"] = num(d.value);
  dj["q"] = nums(d.q);
  dj["mixture"] = nums(d.mixture);
  dj["penalty"] = num(d.penalty);
  dj["iterations"] = d.iterations;
  r["dual_oce"] = std::move(dj);
  if (const auto& q = inst.doc().candidate_q) {
    const auto pen = divergence_penalty(*q, probs, loss);
    ojson pj;
    pj["q"] = nums(*q);
    pj["value"] = num(pen.value);
    pj["mixture"] = nums(pen.mixture);
    r["candidate_penalty"] = std::move(pj);
  }
  ojson it;
  it["dual_oce"] = d.iterations;
  r["iterations"] = std::move(it);
  r["tolerances"] = tolerances_json(inst.tolerances());
  return finish(std::move(r), Outcome::success);
}

CommandReport cmd_oracle_brute_force(const Instance& inst) {
  const auto& tree = inst.tree();
  const auto& x = inst.claim();
  const double floor = inst.floor().value_or(kInfinity);
  ojson r = header(inst, "oracle.brute_force");
  const oracle::GridSpec grid;
  const auto b = oracle::brute_force_primal(tree, inst.measures(), x, inst.loss(), grid, floor);
  r["price"] = num(b.price);
  r["positions"] = nums(b.positions);
  r["final_z_step"] = b.final_z_step;
  r["m_step"] = grid.m_step;
  r["points"] = b.points;
  return finish(std::move(r), std::isfinite(b.price) ? Outcome::success : Outcome::nonviable);
}

CommandReport cmd_oracle_vertices(const Instance& inst) {
  const auto& tree = inst.tree();
  ojson r = header(inst, "oracle.vertices");
  const auto vs = oracle::enumerate_martingale_vertices(tree, inst.measures().support());
  ojson a = ojson::array();
  double best = -kInfinity;
  for (const auto& v : vs) {
    ojson o;
    o["leaf_probabilities"] = nums(v.leaf_probabilities);
    if (inst.has_claim()) {
      double e = 0.0;
      for (std::size_t i = 0; i < v.leaf_probabilities.size(); ++i)
        e += v.leaf_probabilities[i] * inst.claim().payoff[i];
      o["expectation"] = num(e);
      best = std::max(best, e);
    }
    a.push_back(std::move(o));
  }
  r["count"] = vs.size();
  r["vertices"] = std::move(a);
  if (inst.has_claim()) r["max_expectation"] = num(best);
  return finish(std::move(r), vs.empty() ? Outcome::nonviable : Outcome::success);
}

CommandReport cmd_oracle_cvar(const Instance& inst) {
  if (inst.loss().kind() != LossKind::cvar) throw ValidationError("loss.kind", "oracle.cvar needs a cvar loss");
  const auto& x = inst.position();
  ojson r = header(inst, "oracle.cvar");
  ojson a = ojson::array();
  double worst = -kInfinity;
  for (const auto& p : inst.measures().leaf_probabilities()) {
    const double v = oracle::cvar_sorted(p, x, inst.loss().alpha());
    worst = std::max(worst, v);
    a.push_back(num(v));
  }
  r["cvar"] = std::move(a);
  r["max_cvar"] = num(worst);
  return finish(std::move(r), Outcome::success);
}

CommandReport cmd_oracle_naive_oce(const Instance& inst) {
  const auto& x = inst.position();
  ojson r = header(inst, "oracle.naive_oce");
  r["robust_oce"] = num(oracle::naive_robust_oce(inst.measures().leaf_probabilities(), x, inst.loss()));
  return finish(std::move(r), Outcome::success);
}

}  // namespace

const char* to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::success: return "success";
    case Outcome::validation: return "validation_error";
    case Outcome::nonviable: return "nonviable";
    case Outcome::solver_failure: return "solver_failure";
  }
  return "unknown";
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"price",           "dual",          "verify",
                                              "risk",            "oracle.brute_force", "oracle.vertices",
                                              "oracle.cvar",     "oracle.naive_oce"};
  return names;
}

CommandReport run_command(const Instance& instance, std::string_view command) {
  if (command == "price") return cmd_price(instance);
  if (command == "dual") return cmd_dual(instance);
  if (command == "verify") return cmd_verify(instance);
  if (command == "risk") return cmd_risk(instance);
  if (command == "oracle.brute_force") return cmd_oracle_brute_force(instance);
  if (command == "oracle.vertices") return cmd_oracle_vertices(instance);
  if (command == "oracle.cvar") return cmd_oracle_cvar(instance);
  if (command == "oracle.naive_oce") return cmd_oracle_naive_oce(instance);
  throw ValidationError("", "unknown command '" + std::string(command) + "'");
}

std::string error_report(std::string_view command, Outcome outcome, std::string_view message, std::string_view path) {
  ojson o;
  o["format"] = kInstanceFormat;
  o["command"] = std::string(command);
  o["outcome"] = to_string(outcome);
  ojson e;
  e["message"] = std::string(message);
  if (!path.empty()) e["path"] = std::string(path);
  o["error"] = std::move(e);
  return o.dump(2) + "\n";
}

}  // namespace robhedge
