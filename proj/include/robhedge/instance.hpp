#pragma once

// Instance documents: one JSON object per pricing problem, versioned by a
// top-level "format": 1. Parsing validates everything up front and reports
// the offending field path; serialization is canonical (fixed key order,
// two-space indent, trailing newline).

#include <optional>
#include <string>
#include <vector>

#include "robhedge/loss.hpp"
#include "robhedge/market.hpp"

namespace robhedge {

inline constexpr int kInstanceFormat = 1;

struct TreeDoc {
  // Either a generator ...
  bool generated = true;
  Vec initial_price;
  std::vector<Vec> factors;
  int steps = 0;
  // ... or an explicit node list.
  std::vector<NodeSpec> nodes;
};

struct MeasureDoc {
  enum class Form { step, transitions, leaf_probabilities } form = Form::step;
  Vec step;
  std::vector<Vec> transitions;
  Vec leaf_probabilities;
};

struct ClaimDoc {
  enum class Kind { payoff, call, put, constant } kind = Kind::payoff;
  Vec payoff;
  double strike = 0.0;
  int asset = 0;
  double value = 0.0;
};

struct LossDoc {
  std::string kind;  // power, cvar, entropic, piecewise_linear, strict_cone
  double p = 0.0;
  double alpha = 0.0;
  Vec breakpoints;
  Vec slopes;
};

struct Tolerances {
  double solver = 1e-10;  // barrier duality gap of the smooth solvers
  int max_iterations = 5000;
  double gap_weak = 1e-6;
  double gap_strong = 1e-4;
  double gap_lp = 1e-7;
  double martingale = 1e-8;
};

struct InstanceDoc {
  std::string name;
  TreeDoc tree;
  std::vector<MeasureDoc> measures;
  // Optional for risk-only documents that carry a position.
  std::optional<ClaimDoc> claim;
  LossDoc loss;
  std::optional<double> floor_c;
  std::optional<Tolerances> tolerances;
  // Explicit leaf position for risk queries; defaults to the claim payoff.
  std::optional<Vec> position;
  // Leaf probabilities of a measure whose penalty is reported.
  std::optional<Vec> candidate_q;
};

// A validated document and the model objects built from it.
class Instance {
 public:
  static Instance parse(const std::string& text);
  static Instance load(const std::string& path);
  static Instance from_doc(InstanceDoc doc);

  const InstanceDoc& doc() const noexcept { return doc_; }
  const ScenarioTree& tree() const noexcept { return tree_; }
  const ReferenceMeasureSet& measures() const noexcept { return pset_; }
  bool has_claim() const noexcept { return doc_.claim.has_value(); }
  // Throws ValidationError when the document has no claim.
  const Claim& claim() const;
  const LossSpec& loss() const noexcept { return loss_; }
  std::optional<double> floor() const noexcept { return doc_.floor_c; }
  Tolerances tolerances() const { return doc_.tolerances.value_or(Tolerances{}); }
  // Explicit leaf position: the "position" field, else an explicit payoff
  // claim. Throws ValidationError when neither is present.
  const Vec& position() const;

  void set_floor(std::optional<double> c);
  void set_solver_tolerance(double tol);

  std::string serialize() const;

 private:
  Instance(InstanceDoc doc, ScenarioTree tree, ReferenceMeasureSet pset, Claim claim, LossSpec loss, Vec position)
      : doc_(std::move(doc)),
        tree_(std::move(tree)),
        pset_(std::move(pset)),
        claim_(std::move(claim)),
        loss_(std::move(loss)),
        position_(std::move(position)) {}

  InstanceDoc doc_;
  ScenarioTree tree_;
  ReferenceMeasureSet pset_;
  Claim claim_;
  LossSpec loss_;
  Vec position_;
};

}  // namespace robhedge
