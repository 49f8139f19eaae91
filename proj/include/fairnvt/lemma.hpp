#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fairnvt::lemma {

// Joint distribution over (Z, S, Y) with Z on a small finite support and
// S, Y binary. Probabilities are stored as p[z][s][y].
class DiscreteJoint {
 public:
  DiscreteJoint(std::size_t z_support, std::vector<double> probs);

  std::size_t z_support() const { return nz_; }
  double p(std::size_t z, int s, int y) const { return probs_[(z * 2 + s) * 2 + y]; }

  double p_s(int s) const;
  // P(Z=z | S=s); the conditioning group must have positive mass.
  double p_z_given_s(std::size_t z, int s) const;

 private:
  std::size_t nz_;
  std::vector<double> probs_;
};

// Half L1 distance between the conditionals of Z given S=0 and S=1.
double tv_distance(const DiscreteJoint& joint);

// A deterministic classifier on Z: the set of z values predicted positive,
// encoded as a bitmask over the support.
using AcceptanceMask = std::uint32_t;

// Exact group-fairness gaps of the classifier under the joint; a gap whose
// conditioning cell has zero mass is left unset.
struct Gaps {
  std::optional<double> dp;
  std::optional<double> eo;
  std::optional<double> eopp;
};

Gaps gaps(const DiscreteJoint& joint, AcceptanceMask accept);

struct LemmaReport {
  std::size_t independent_trials = 0;
  std::size_t dependent_trials = 0;
  std::size_t violations = 0;
  std::string summary;             // plain-text pass/fail lines
  std::string trials_csv;          // trial,kind,tv,max_dp
  bool passed() const { return violations == 0; }
};

// Property suites behind the independence claim: independent joints have zero
// gaps for every classifier, and no classifier's DP exceeds the total
// variation distance, whose sup is attained at {z : P(z|S=0) > P(z|S=1)}.
LemmaReport verify_lemma(std::size_t trials, std::uint64_t seed);

}  // namespace fairnvt::lemma
