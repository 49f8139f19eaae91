#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "fairnvt/errors.hpp"
#include "fairnvt/lemma.hpp"
#include "fairnvt/rng.hpp"

namespace lemma = fairnvt::lemma;

namespace {

// Joint from marginals: p(z, s, y) = pz[z] * ps[s] * py_given_z[z][y == 1].
lemma::DiscreteJoint independent_joint(const std::vector<double>& pz, double ps1,
                                       const std::vector<double>& py1_given_z) {
  std::vector<double> probs;
  for (std::size_t z = 0; z < pz.size(); ++z) {
    for (int s = 0; s <= 1; ++s) {
      for (int y = 0; y <= 1; ++y) {
        const double psv = s == 1 ? ps1 : 1.0 - ps1;
        const double pyv = y == 1 ? py1_given_z[z] : 1.0 - py1_given_z[z];
        probs.push_back(pz[z] * psv * pyv);
      }
    }
  }
  return lemma::DiscreteJoint(pz.size(), probs);
}

// Joint with the given conditionals P(z|S=0), Q(z|S=1), equal group masses
// and y drawn uniformly at random independent of everything.
lemma::DiscreteJoint conditional_joint(const std::vector<double>& p,
                                       const std::vector<double>& q) {
  std::vector<double> probs;
  for (std::size_t z = 0; z < p.size(); ++z) {
    probs.push_back(0.5 * p[z] * 0.5);  // s=0, y=0
    probs.push_back(0.5 * p[z] * 0.5);  // s=0, y=1
    probs.push_back(0.5 * q[z] * 0.5);  // s=1, y=0
    probs.push_back(0.5 * q[z] * 0.5);  // s=1, y=1
  }
  return lemma::DiscreteJoint(p.size(), probs);
}

}  // namespace

TEST_CASE("total variation hand examples") {
  // P == Q.
  const lemma::DiscreteJoint same = conditional_joint({0.3, 0.7}, {0.3, 0.7});
  CHECK(std::fabs(tv_distance(same)) < 1e-12);

  // Disjoint supports.
  const lemma::DiscreteJoint disjoint = conditional_joint({1.0, 0.0}, {0.0, 1.0});
  CHECK(tv_distance(disjoint) == doctest::Approx(1.0).epsilon(1e-12));

  const lemma::DiscreteJoint shifted = conditional_joint({0.6, 0.4}, {0.4, 0.6});
  CHECK(tv_distance(shifted) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("joint validation") {
  CHECK_THROWS_AS(lemma::DiscreteJoint(0, {}), fairnvt::ValueError);
  CHECK_THROWS_AS(lemma::DiscreteJoint(9, std::vector<double>(36, 1.0 / 36.0)),
                  fairnvt::ValueError);
  CHECK_THROWS_AS(lemma::DiscreteJoint(2, {0.5, 0.5}), fairnvt::ShapeError);
  CHECK_THROWS_AS(lemma::DiscreteJoint(1, {0.5, 0.5, 0.5, 0.5}), fairnvt::ValueError);
  CHECK_THROWS_AS(lemma::DiscreteJoint(1, {-0.1, 0.5, 0.3, 0.3}), fairnvt::ValueError);

  // Zero-mass group: the conditional is undefined.
  const lemma::DiscreteJoint degenerate(1, {0.5, 0.5, 0.0, 0.0});
  CHECK_THROWS_AS(lemma::tv_distance(degenerate), fairnvt::ValueError);
  CHECK_THROWS_AS(degenerate.p_z_given_s(0, 1), fairnvt::ValueError);
  CHECK(degenerate.p_z_given_s(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("independent joints have zero gaps for every classifier") {
  const lemma::DiscreteJoint joint =
      independent_joint({0.2, 0.5, 0.3}, 0.4, {0.9, 0.2, 0.5});
  const std::size_t masks = std::size_t{1} << joint.z_support();
  for (lemma::AcceptanceMask a = 0; a < masks; ++a) {
    const lemma::Gaps g = lemma::gaps(joint, a);
    REQUIRE(g.dp.has_value());
    REQUIRE(g.eo.has_value());
    REQUIRE(g.eopp.has_value());
    CHECK(std::fabs(*g.dp) < 1e-12);
    CHECK(std::fabs(*g.eo) < 1e-12);
    CHECK(std::fabs(*g.eopp) < 1e-12);
  }
}

TEST_CASE("the full-support classifier is constant and therefore fair") {
  const lemma::DiscreteJoint joint = conditional_joint({0.7, 0.3}, {0.2, 0.8});
  const lemma::AcceptanceMask all = 0b11;
  const lemma::Gaps g = lemma::gaps(joint, all);
  CHECK(std::fabs(*g.dp) < 1e-12);
  CHECK(std::fabs(*g.eo) < 1e-12);
  CHECK(std::fabs(*g.eopp) < 1e-12);

  const lemma::Gaps none = lemma::gaps(joint, 0);
  CHECK(std::fabs(*none.dp) < 1e-12);
}

TEST_CASE("dp is bounded by the tv distance with the sup attained") {
  const std::vector<double> p{0.6, 0.4};
  const std::vector<double> q{0.4, 0.6};
  const lemma::DiscreteJoint joint = conditional_joint(p, q);
  const double tv = lemma::tv_distance(joint);
  CHECK(tv == doctest::Approx(0.2).epsilon(1e-12));

  double max_dp = 0.0;
  for (lemma::AcceptanceMask a = 0; a < 4; ++a) {
    const lemma::Gaps g = lemma::gaps(joint, a);
    REQUIRE(g.dp.has_value());
    CHECK(*g.dp <= tv + 1e-12);
    max_dp = std::max(max_dp, *g.dp);
  }
  CHECK(std::fabs(max_dp - tv) < 1e-12);

  // The sup sits exactly on A* = {z : P(z|S=0) > Q(z|S=1)} = {0}.
  const lemma::Gaps star = lemma::gaps(joint, 0b01);
  CHECK(std::fabs(*star.dp - tv) < 1e-12);
}

TEST_CASE("gaps conditioned on empty cells stay unset") {
  // No mass on (s=1, y=1): eopp undefined, dp still defined.
  const lemma::DiscreteJoint joint(2, {0.25, 0.25, 0.25, 0.0,
                                       0.25, 0.0, 0.0, 0.0});
  const lemma::Gaps g = lemma::gaps(joint, 0b01);
  CHECK(g.dp.has_value());
  CHECK_FALSE(g.eopp.has_value());
  CHECK_FALSE(g.eo.has_value());

  CHECK_THROWS_AS(lemma::gaps(joint, 0b100), fairnvt::ValueError);
}

TEST_CASE("verify_lemma reports clean suites") {
  const lemma::LemmaReport r = lemma::verify_lemma(200, 42);
  CHECK(r.passed());
  CHECK(r.violations == 0);
  CHECK(r.independent_trials == 200);
  CHECK(r.dependent_trials == 200);
  CHECK(r.summary.find("pass") != std::string::npos);

  // Per-trial CSV: header plus one row per trial.
  std::size_t lines = 0;
  for (char c : r.trials_csv) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 1 + r.independent_trials + r.dependent_trials);
  CHECK(r.trials_csv.rfind("trial,kind,tv,max_dp\n", 0) == 0);

  // Deterministic per seed.
  const lemma::LemmaReport again = lemma::verify_lemma(200, 42);
  CHECK(again.trials_csv == r.trials_csv);
  const lemma::LemmaReport other = lemma::verify_lemma(200, 43);
  CHECK(other.trials_csv != r.trials_csv);
}
