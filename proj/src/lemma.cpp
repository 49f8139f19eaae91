#include "fairnvt/lemma.hpp"

#include <cmath>

#include "fairnvt/errors.hpp"
#include "fairnvt/rng.hpp"
#include "fairnvt/textio.hpp"

namespace fairnvt::lemma {

namespace {

constexpr std::size_t kMaxSupport = 8;
constexpr double kTol = 1e-12;
constexpr std::size_t kDependentCap = 200;

DiscreteJoint random_independent(std::size_t nz, RngStream& rng) {
  // p(z), p(s) and p(y|z) sampled separately; the product form makes Z and S
  // independent by construction.
  std::vector<double> pz(nz);
  double sum = 0.0;
  for (auto& v : pz) {
    v = -std::log(1.0 - rng.next_uniform());
    sum += v;
  }
  for (auto& v : pz) v /= sum;
  double ps1 = rng.next_uniform();
  while (ps1 <= 0.0) ps1 = rng.next_uniform();
  std::vector<double> py1_given_z(nz);
  for (auto& v : py1_given_z) v = rng.next_uniform();

  std::vector<double> probs(nz * 4);
  for (std::size_t z = 0; z < nz; ++z) {
    for (int s = 0; s < 2; ++s) {
      const double p_zs = pz[z] * (s == 1 ? ps1 : 1.0 - ps1);
      probs[(z * 2 + s) * 2 + 1] = p_zs * py1_given_z[z];
      probs[(z * 2 + s) * 2 + 0] = p_zs * (1.0 - py1_given_z[z]);
    }
  }
  return DiscreteJoint(nz, std::move(probs));
}

DiscreteJoint random_dependent(std::size_t nz, RngStream& rng) {
  std::vector<double> probs(nz * 4);
  double sum = 0.0;
  for (auto& v : probs) {
    v = -std::log(1.0 - rng.next_uniform());
    sum += v;
  }
  for (auto& v : probs) v /= sum;
  return DiscreteJoint(nz, std::move(probs));
}

}  // namespace

DiscreteJoint::DiscreteJoint(std::size_t z_support, std::vector<double> probs)
    : nz_(z_support), probs_(std::move(probs)) {
  if (nz_ < 1 || nz_ > kMaxSupport) {
    throw ValueError("Z support size must be in [1, " + std::to_string(kMaxSupport) + "]");
  }
  if (probs_.size() != nz_ * 4) {
    throw ShapeError("joint table must hold |Z| x 2 x 2 probabilities");
  }
  double sum = 0.0;
  for (double v : probs_) {
    if (!(v >= 0.0)) throw ValueError("joint probabilities must be non-negative");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > kTol) {
    throw ValueError("joint probabilities must sum to 1, got " + textio::fmt_g17(sum));
  }
}

double DiscreteJoint::p_s(int s) const {
  double sum = 0.0;
  for (std::size_t z = 0; z < nz_; ++z) sum += p(z, s, 0) + p(z, s, 1);
  return sum;
}

double DiscreteJoint::p_z_given_s(std::size_t z, int s) const {
  const double mass = p_s(s);
  if (mass <= 0.0) {
    throw ValueError("conditional undefined: group S=" + std::to_string(s) + " has zero mass");
  }
  return (p(z, s, 0) + p(z, s, 1)) / mass;
}

double tv_distance(const DiscreteJoint& joint) {
  double acc = 0.0;
  for (std::size_t z = 0; z < joint.z_support(); ++z) {
    acc += std::fabs(joint.p_z_given_s(z, 0) - joint.p_z_given_s(z, 1));
  }
  return 0.5 * acc;
}

Gaps gaps(const DiscreteJoint& joint, AcceptanceMask accept) {
  const std::size_t nz = joint.z_support();
  if (accept >= (AcceptanceMask{1} << nz)) {
    throw ValueError("acceptance mask addresses states outside the Z support");
  }

  // mass[s][y], hits[s][y] = P(S=s, Y=y) and P(accept, S=s, Y=y).
  double mass[2][2] = {};
  double hits[2][2] = {};
  for (std::size_t z = 0; z < nz; ++z) {
    const bool in = (accept >> z) & 1u;
    for (int s = 0; s < 2; ++s) {
      for (int y = 0; y < 2; ++y) {
        mass[s][y] += joint.p(z, s, y);
        if (in) hits[s][y] += joint.p(z, s, y);
      }
    }
  }

  Gaps out;
  const double m0 = mass[0][0] + mass[0][1];
  const double m1 = mass[1][0] + mass[1][1];
  if (m0 > 0.0 && m1 > 0.0) {
    out.dp = std::fabs((hits[0][0] + hits[0][1]) / m0 - (hits[1][0] + hits[1][1]) / m1);
  }
  if (mass[0][1] > 0.0 && mass[1][1] > 0.0) {
    out.eopp = std::fabs(hits[0][1] / mass[0][1] - hits[1][1] / mass[1][1]);
  }
  if (out.eopp.has_value() && mass[0][0] > 0.0 && mass[1][0] > 0.0) {
    const double fpr_gap = std::fabs(hits[0][0] / mass[0][0] - hits[1][0] / mass[1][0]);
    out.eo = 0.5 * (*out.eopp + fpr_gap);
  }
  return out;
}

LemmaReport verify_lemma(std::size_t trials, std::uint64_t seed) {
  RngStream rng(seed, stream_id::kDataGen);
  LemmaReport report;
  report.independent_trials = trials;
  report.dependent_trials = std::min(kDependentCap, trials);
  report.trials_csv = "trial,kind,tv,max_dp\n";

  std::string first_failure;
  const auto record_failure = [&](const std::string& what) {
    ++report.violations;
    if (first_failure.empty()) first_failure = what;
  };

  for (std::size_t t = 0; t < report.independent_trials; ++t) {
    const std::size_t nz = 2 + rng.next_below(kMaxSupport - 1);
    const DiscreteJoint joint = random_independent(nz, rng);
    const double tv = tv_distance(joint);
    double max_dp = 0.0;
    for (AcceptanceMask a = 0; a < (AcceptanceMask{1} << nz); ++a) {
      const Gaps g = gaps(joint, a);
      for (const auto& gap : {g.dp, g.eo, g.eopp}) {
        if (gap.has_value() && *gap > kTol) {
          record_failure("independent joint, trial " + std::to_string(t) + ", mask " +
                         std::to_string(a) + ": gap " + textio::fmt_g17(*gap));
        }
      }
      if (g.dp.has_value()) max_dp = std::max(max_dp, *g.dp);
    }
    if (tv > kTol) {
      record_failure("independent joint, trial " + std::to_string(t) + ": tv " +
                     textio::fmt_g17(tv));
    }
    report.trials_csv += std::to_string(t) + ",independent," + textio::fmt_g17(tv) + "," +
                         textio::fmt_g17(max_dp) + "\n";
  }

  for (std::size_t t = 0; t < report.dependent_trials; ++t) {
    const std::size_t nz = 2 + rng.next_below(kMaxSupport - 1);
    const DiscreteJoint joint = random_dependent(nz, rng);
    const double tv = tv_distance(joint);

    AcceptanceMask star = 0;
    for (std::size_t z = 0; z < nz; ++z) {
      if (joint.p_z_given_s(z, 0) > joint.p_z_given_s(z, 1)) star |= AcceptanceMask{1} << z;
    }

    double max_dp = 0.0;
    for (AcceptanceMask a = 0; a < (AcceptanceMask{1} << nz); ++a) {
      const Gaps g = gaps(joint, a);
      if (!g.dp.has_value()) continue;
      max_dp = std::max(max_dp, *g.dp);
      if (*g.dp > tv + kTol) {
        record_failure("dependent joint, trial " + std::to_string(t) + ", mask " +
                       std::to_string(a) + ": dp " + textio::fmt_g17(*g.dp) + " > tv " +
                       textio::fmt_g17(tv));
      }
    }
    const Gaps at_star = gaps(joint, star);
    if (!at_star.dp.has_value() || std::fabs(*at_star.dp - tv) > kTol ||
        std::fabs(max_dp - tv) > kTol) {
      record_failure("dependent joint, trial " + std::to_string(t) +
                     ": sup not attained at the positive-difference set");
    }
    report.trials_csv += std::to_string(t) + ",dependent," + textio::fmt_g17(tv) + "," +
                         textio::fmt_g17(max_dp) + "\n";
  }

  report.summary = "independence suite: " + std::to_string(report.independent_trials) +
                   " joints, all classifiers -> ";
  report.summary += report.violations == 0 ? "zero gaps\n" : "VIOLATIONS\n";
  report.summary += "tv bound suite: " + std::to_string(report.dependent_trials) +
                    " joints, all classifiers -> ";
  report.summary += report.violations == 0 ? "dp <= tv, sup attained\n" : "VIOLATIONS\n";
  report.summary += "violations: " + std::to_string(report.violations) + "\n";
  if (!first_failure.empty()) report.summary += "first: " + first_failure + "\n";
  report.summary += report.violations == 0 ? "result: pass\n" : "result: FAIL\n";
  return report;
}

}  // namespace fairnvt::lemma
