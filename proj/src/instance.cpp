#include "robhedge/instance.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

namespace robhedge {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string field(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string item(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ValidationError(path, msg); }

void expect_object(const json& v, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!v.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : v.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) fail(field(path, key), "unknown field");
  }
}

const json& required(const json& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(field(path, key), "missing required field");
  return *it;
}

const json* optional_field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(path, "expected a finite number");
  return d;
}

int integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  const auto i = v.get<long long>();
  if (i < 0 || i > 1000000000) fail(path, "integer out of range");
  return static_cast<int>(i);
}

Vec numbers(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  Vec out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], item(path, i)));
  return out;
}

std::vector<Vec> matrix(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of arrays");
  std::vector<Vec> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(numbers(v[i], item(path, i)));
  return out;
}

void check_probabilities(const Vec& p, const std::string& path) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0) fail(item(path, i), "probability is negative");
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) fail(path, "probabilities sum to " + std::to_string(sum) + ", expected 1");
}

TreeDoc parse_tree(const json& v, const std::string& path) {
  expect_object(v, path, {"generator", "nodes"});
  const json* gen = optional_field(v, "generator");
  const json* nodes = optional_field(v, "nodes");
  if ((gen != nullptr) == (nodes != nullptr)) fail(path, "expected exactly one of generator, nodes");
  TreeDoc doc;
  if (gen) {
    const std::string g = field(path, "generator");
    expect_object(*gen, g, {"initial_price", "factors", "steps"});
    doc.generated = true;
    doc.initial_price = numbers(required(*gen, g, "initial_price"), field(g, "initial_price"));
    doc.factors = matrix(required(*gen, g, "factors"), field(g, "factors"));
    doc.steps = integer(required(*gen, g, "steps"), field(g, "steps"));
    if (doc.initial_price.empty()) fail(field(g, "initial_price"), "needs at least one asset");
    if (doc.factors.empty()) fail(field(g, "factors"), "needs at least one factor");
    for (std::size_t i = 0; i < doc.factors.size(); ++i) {
      const auto n = doc.factors[i].size();
      if (n != 1 && n != doc.initial_price.size())
        fail(item(field(g, "factors"), i), "expected 1 or " + std::to_string(doc.initial_price.size()) + " entries");
    }
    if (doc.steps < 1 || doc.steps > 20) fail(field(g, "steps"), "expected 1..20");
    return doc;
  }
  doc.generated = false;
  const std::string n = field(path, "nodes");
  if (!nodes->is_array() || nodes->empty()) fail(n, "expected a non-empty array of nodes");
  for (std::size_t i = 0; i < nodes->size(); ++i) {
    const std::string np = item(n, i);
    const json& node = (*nodes)[i];
    expect_object(node, np, {"time", "price", "children"});
    NodeSpec spec;
    spec.time = integer(required(node, np, "time"), field(np, "time"));
    spec.price = numbers(required(node, np, "price"), field(np, "price"));
    const json& ch = required(node, np, "children");
    if (!ch.is_array()) fail(field(np, "children"), "expected an array of node indices");
    for (std::size_t c = 0; c < ch.size(); ++c) {
      const int idx = integer(ch[c], item(field(np, "children"), c));
      if (static_cast<std::size_t>(idx) >= nodes->size()) fail(item(field(np, "children"), c), "node index out of range");
      spec.children.push_back(idx);
    }
    doc.nodes.push_back(std::move(spec));
  }
  return doc;
}

MeasureDoc parse_measure(const json& v, const std::string& path) {
  expect_object(v, path, {"step", "transitions", "leaf_probabilities"});
  if (v.size() != 1) fail(path, "expected exactly one of step, transitions, leaf_probabilities");
  MeasureDoc doc;
  if (const json* s = optional_field(v, "step")) {
    doc.form = MeasureDoc::Form::step;
    doc.step = numbers(*s, field(path, "step"));
  } else if (const json* t = optional_field(v, "transitions")) {
    doc.form = MeasureDoc::Form::transitions;
    doc.transitions = matrix(*t, field(path, "transitions"));
  } else {
    doc.form = MeasureDoc::Form::leaf_probabilities;
    doc.leaf_probabilities = numbers(v.at("leaf_probabilities"), field(path, "leaf_probabilities"));
  }
  return doc;
}

ClaimDoc parse_claim(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  const json& k = required(v, path, "kind");
  if (!k.is_string()) fail(field(path, "kind"), "expected a string");
  const auto kind = k.get<std::string>();
  ClaimDoc doc;
  if (kind == "payoff") {
    expect_object(v, path, {"kind", "payoff"});
    doc.kind = ClaimDoc::Kind::payoff;
    doc.payoff = numbers(required(v, path, "payoff"), field(path, "payoff"));
  } else if (kind == "call" || kind == "put") {
    expect_object(v, path, {"kind", "strike", "asset"});
    doc.kind = kind == "call" ? ClaimDoc::Kind::call : ClaimDoc::Kind::put;
    doc.strike = number(required(v, path, "strike"), field(path, "strike"));
    if (const json* a = optional_field(v, "asset")) doc.asset = integer(*a, field(path, "asset"));
  } else if (kind == "constant") {
    expect_object(v, path, {"kind", "value"});
    doc.kind = ClaimDoc::Kind::constant;
    doc.value = number(required(v, path, "value"), field(path, "value"));
  } else {
    fail(field(path, "kind"), "unknown claim kind '" + kind + "' (payoff, call, put, constant)");
  }
  return doc;
}

LossDoc parse_loss(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  const json& k = required(v, path, "kind");
  if (!k.is_string()) fail(field(path, "kind"), "expected a string");
  LossDoc doc;
  doc.kind = k.get<std::string>();
  if (doc.kind == "power") {
    expect_object(v, path, {"kind", "p"});
    doc.p = number(required(v, path, "p"), field(path, "p"));
  } else if (doc.kind == "cvar") {
    expect_object(v, path, {"kind", "alpha"});
    doc.alpha = number(required(v, path, "alpha"), field(path, "alpha"));
  } else if (doc.kind == "piecewise_linear") {
    expect_object(v, path, {"kind", "breakpoints", "slopes"});
    doc.breakpoints = numbers(required(v, path, "breakpoints"), field(path, "breakpoints"));
    doc.slopes = numbers(required(v, path, "slopes"), field(path, "slopes"));
  } else if (doc.kind == "entropic" || doc.kind == "strict_cone") {
    expect_object(v, path, {"kind"});
  } else {
    fail(field(path, "kind"),
         "unknown loss kind '" + doc.kind + "' (power, cvar, entropic, piecewise_linear, strict_cone)");
  }
  return doc;
}

Tolerances parse_tolerances(const json& v, const std::string& path) {
  expect_object(v, path, {"solver", "max_iterations", "gap_weak", "gap_strong", "gap_lp", "martingale"});
  Tolerances t;
  auto positive = [&](const char* key, double& out) {
    if (const json* x = optional_field(v, key)) {
      out = number(*x, field(path, key));
      if (out <= 0.0) fail(field(path, key), "expected a positive number");
    }
  };
  positive("solver", t.solver);
  positive("gap_weak", t.gap_weak);
  positive("gap_strong", t.gap_strong);
  positive("gap_lp", t.gap_lp);
  positive("martingale", t.martingale);
  if (const json* x = optional_field(v, "max_iterations")) {
    t.max_iterations = integer(*x, field(path, "max_iterations"));
    if (t.max_iterations < 1) fail(field(path, "max_iterations"), "expected a positive integer");
  }
  return t;
}

InstanceDoc parse_doc(const json& root) {
  expect_object(root, "", {"format", "name", "tree", "measures", "claim", "loss", "floor_c", "tolerances",
                           "position", "candidate_q"});
  const json& fmt = required(root, "", "format");
  if (!fmt.is_number_integer() || fmt.get<long long>() != kInstanceFormat)
    fail("format", "unsupported format, expected " + std::to_string(kInstanceFormat));
  InstanceDoc doc;
  if (const json* n = optional_field(root, "name")) {
    if (!n->is_string()) fail("name", "expected a string");
    doc.name = n->get<std::string>();
  }
  doc.tree = parse_tree(required(root, "", "tree"), "tree");
  const json& ms = required(root, "", "measures");
  if (!ms.is_array() || ms.empty()) fail("measures", "expected a non-empty array");
  for (std::size_t i = 0; i < ms.size(); ++i) doc.measures.push_back(parse_measure(ms[i], item("measures", i)));
  if (const json* c = optional_field(root, "claim")) doc.claim = parse_claim(*c, "claim");
  doc.loss = parse_loss(required(root, "", "loss"), "loss");
  if (const json* f = optional_field(root, "floor_c")) {
    doc.floor_c = number(*f, "floor_c");
    if (*doc.floor_c < 0.0) fail("floor_c", "expected a nonnegative number");
  }
  if (const json* t = optional_field(root, "tolerances")) doc.tolerances = parse_tolerances(*t, "tolerances");
  if (const json* p = optional_field(root, "position")) doc.position = numbers(*p, "position");
  if (const json* q = optional_field(root, "candidate_q")) doc.candidate_q = numbers(*q, "candidate_q");
  return doc;
}

ScenarioTree build_tree(const TreeDoc& doc) {
  try {
    if (doc.generated) return ScenarioTree::generate(doc.initial_price, doc.factors, doc.steps);
    return ScenarioTree::from_nodes(doc.nodes);
  } catch (const ValidationError&) {
    throw;
  } catch (const ModelError& e) {
    fail(doc.generated ? "tree.generator" : "tree.nodes", e.what());
  }
}

TreeMeasure build_measure(const ScenarioTree& tree, const MeasureDoc& doc, const std::string& path) {
  const auto& internal = tree.internal_nodes();
  switch (doc.form) {
    case MeasureDoc::Form::step: {
      const std::string p = field(path, "step");
      for (int node : internal)
        if (tree.children(node).size() != doc.step.size())
          fail(p, "has " + std::to_string(doc.step.size()) + " entries but node " + std::to_string(node) + " has " +
                      std::to_string(tree.children(node).size()) + " children");
      check_probabilities(doc.step, p);
      return TreeMeasure::homogeneous(tree, doc.step);
    }
    case MeasureDoc::Form::transitions: {
      const std::string p = field(path, "transitions");
      if (doc.transitions.size() != internal.size())
        fail(p, "has " + std::to_string(doc.transitions.size()) + " rows but the tree has " +
                    std::to_string(internal.size()) + " internal nodes");
      for (std::size_t i = 0; i < internal.size(); ++i) {
        const auto want = tree.children(internal[i]).size();
        if (doc.transitions[i].size() != want)
          fail(item(p, i), "has " + std::to_string(doc.transitions[i].size()) + " entries but node " +
                               std::to_string(internal[i]) + " has " + std::to_string(want) + " children");
        check_probabilities(doc.transitions[i], item(p, i));
      }
      return TreeMeasure(tree, doc.transitions);
    }
    case MeasureDoc::Form::leaf_probabilities: {
      const std::string p = field(path, "leaf_probabilities");
      if (doc.leaf_probabilities.size() != tree.leaves().size())
        fail(p, "has " + std::to_string(doc.leaf_probabilities.size()) + " entries but the tree has " +
                    std::to_string(tree.leaves().size()) + " leaves");
      check_probabilities(doc.leaf_probabilities, p);
      return TreeMeasure::from_leaf_probabilities(tree, doc.leaf_probabilities);
    }
  }
  fail(path, "unknown measure form");
}

Claim build_claim(const ScenarioTree& tree, const ClaimDoc& doc) {
  switch (doc.kind) {
    case ClaimDoc::Kind::payoff:
      if (doc.payoff.size() != tree.leaves().size())
        fail("claim.payoff", "has " + std::to_string(doc.payoff.size()) + " entries but the tree has " +
                                 std::to_string(tree.leaves().size()) + " leaves");
      return Claim{doc.payoff};
    case ClaimDoc::Kind::call:
    case ClaimDoc::Kind::put:
      if (static_cast<std::size_t>(doc.asset) >= tree.assets())
        fail("claim.asset", "asset index out of range (tree has " + std::to_string(tree.assets()) + " assets)");
      return doc.kind == ClaimDoc::Kind::call ? Claim::call(tree, doc.strike, doc.asset)
                                              : Claim::put(tree, doc.strike, doc.asset);
    case ClaimDoc::Kind::constant:
      return Claim::constant(tree, doc.value);
  }
  fail("claim", "unknown claim kind");
}

LossSpec build_loss(const LossDoc& doc) {
  try {
    if (doc.kind == "power") return LossSpec::power(doc.p);
    if (doc.kind == "cvar") return LossSpec::cvar(doc.alpha);
    if (doc.kind == "entropic") return LossSpec::entropic();
    if (doc.kind == "piecewise_linear") return LossSpec::piecewise_linear(doc.breakpoints, doc.slopes);
    if (doc.kind == "strict_cone") return LossSpec::strict_cone();
  } catch (const ModelError& e) {
    fail("loss", e.what());
  }
  fail("loss.kind", "unknown loss kind '" + doc.kind + "'");
}

ojson write_numbers(const Vec& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(x);
  return a;
}

ojson write_matrix(const std::vector<Vec>& m) {
  ojson a = ojson::array();
  for (const auto& row : m) a.push_back(write_numbers(row));
  return a;
}

ojson write_doc(const InstanceDoc& doc) {
  ojson root;
  root["format"] = kInstanceFormat;
  if (!doc.name.empty()) root["name"] = doc.name;
  ojson tree;
  if (doc.tree.generated) {
    ojson g;
    g["initial_price"] = write_numbers(doc.tree.initial_price);
    g["factors"] = write_matrix(doc.tree.factors);
    g["steps"] = doc.tree.steps;
    tree["generator"] = std::move(g);
  } else {
    ojson nodes = ojson::array();
    for (const auto& n : doc.tree.nodes) {
      ojson o;
      o["time"] = n.time;
      o["price"] = write_numbers(n.price);
      o["children"] = n.children;
      nodes.push_back(std::move(o));
    }
    tree["nodes"] = std::move(nodes);
  }
  root["tree"] = std::move(tree);
  ojson ms = ojson::array();
  for (const auto& m : doc.measures) {
    ojson o;
    switch (m.form) {
      case MeasureDoc::Form::step: o["step"] = write_numbers(m.step); break;
      case MeasureDoc::Form::transitions: o["transitions"] = write_matrix(m.transitions); break;
      case MeasureDoc::Form::leaf_probabilities: o["leaf_probabilities"] = write_numbers(m.leaf_probabilities); break;
    }
    ms.push_back(std::move(o));
  }
  root["measures"] = std::move(ms);
  if (doc.claim) {
    ojson c;
    switch (doc.claim->kind) {
      case ClaimDoc::Kind::payoff:
        c["kind"] = "payoff";
        c["payoff"] = write_numbers(doc.claim->payoff);
        break;
      case ClaimDoc::Kind::call:
      case ClaimDoc::Kind::put:
        c["kind"] = doc.claim->kind == ClaimDoc::Kind::call ? "call" : "put";
        c["strike"] = doc.claim->strike;
        c["asset"] = doc.claim->asset;
        break;
      case ClaimDoc::Kind::constant:
        c["kind"] = "constant";
        c["value"] = doc.claim->value;
        break;
    }
    root["claim"] = std::move(c);
  }
  ojson loss;
  loss["kind"] = doc.loss.kind;
  if (doc.loss.kind == "power") loss["p"] = doc.loss.p;
  if (doc.loss.kind == "cvar") loss["alpha"] = doc.loss.alpha;
  if (doc.loss.kind == "piecewise_linear") {
    loss["breakpoints"] = write_numbers(doc.loss.breakpoints);
    loss["slopes"] = write_numbers(doc.loss.slopes);
  }
  root["loss"] = std::move(loss);
  if (doc.floor_c) root["floor_c"] = *doc.floor_c;
  if (doc.tolerances) {
    const auto& t = *doc.tolerances;
    ojson o;
    o["solver"] = t.solver;
    o["max_iterations"] = t.max_iterations;
    o["gap_weak"] = t.gap_weak;
    o["gap_strong"] = t.gap_strong;
    o["gap_lp"] = t.gap_lp;
    o["martingale"] = t.martingale;
    root["tolerances"] = std::move(o);
  }
  if (doc.position) root["position"] = write_numbers(*doc.position);
  if (doc.candidate_q) root["candidate_q"] = write_numbers(*doc.candidate_q);
  return root;
}

}  // namespace

Instance Instance::parse(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("", std::string("malformed JSON: ") + e.what());
  }
  return from_doc(parse_doc(root));
}

Instance Instance::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Instance Instance::from_doc(InstanceDoc doc) {
  ScenarioTree tree = build_tree(doc.tree);
  std::vector<TreeMeasure> ms;
  for (std::size_t i = 0; i < doc.measures.size(); ++i) {
    const std::string path = item("measures", i);
    try {
      ms.push_back(build_measure(tree, doc.measures[i], path));
    } catch (const ValidationError&) {
      throw;
    } catch (const ModelError& e) {
      fail(path, e.what());
    }
  }
  ReferenceMeasureSet pset(tree, std::move(ms));
  Claim claim;
  if (doc.claim) claim = build_claim(tree, *doc.claim);
  LossSpec loss = build_loss(doc.loss);
  const auto leaves = tree.leaves().size();
  if (doc.position && doc.position->size() != leaves)
    fail("position", "has " + std::to_string(doc.position->size()) + " entries but the tree has " +
                         std::to_string(leaves) + " leaves");
  if (doc.candidate_q) {
    if (doc.candidate_q->size() != leaves)
      fail("candidate_q", "has " + std::to_string(doc.candidate_q->size()) + " entries but the tree has " +
                              std::to_string(leaves) + " leaves");
    check_probabilities(*doc.candidate_q, "candidate_q");
  }
  Vec position;
  if (doc.position)
    position = *doc.position;
  else if (doc.claim && doc.claim->kind == ClaimDoc::Kind::payoff)
    position = claim.payoff;
  return Instance(std::move(doc), std::move(tree), std::move(pset), std::move(claim), std::move(loss),
                  std::move(position));
}

const Claim& Instance::claim() const {
  if (!doc_.claim) fail("claim", "missing required field");
  return claim_;
}

const Vec& Instance::position() const {
  if (position_.empty()) fail("position", "missing required field (or an explicit payoff claim)");
  return position_;
}

void Instance::set_floor(std::optional<double> c) {
  if (c && (!std::isfinite(*c) || *c < 0.0)) fail("floor_c", "expected a nonnegative number");
  doc_.floor_c = c;
}

void Instance::set_solver_tolerance(double tol) {
  if (!std::isfinite(tol) || tol <= 0.0) fail("tolerances.solver", "expected a positive number");
  Tolerances t = tolerances();
  t.solver = tol;
  doc_.tolerances = t;
}

std::string Instance::serialize() const { return write_doc(doc_).dump(2) + "\n"; }

}  // namespace robhedge
