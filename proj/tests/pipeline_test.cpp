#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "mlds/errors.hpp"
#include "mlds/eval.hpp"
#include "mlds/lds.hpp"
#include "mlds/pipeline.hpp"
#include "mlds/random.hpp"

using namespace mlds;

namespace {

Eigen::MatrixXd column(std::initializer_list<double> xs) {
  Eigen::MatrixXd u(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) u(i++, 0) = x;
  return u;
}

StateSpace fir_system(double cb) {
  // x in R^1 with A = 0: g = (CB, 0, 0, ...).
  StateSpace ss;
  ss.a = Eigen::MatrixXd::Zero(1, 1);
  ss.b = Eigen::MatrixXd::Constant(1, 1, 1.0);
  ss.c = Eigen::RowVectorXd::Constant(1, cb);
  return ss;
}

double max_markov_error(const MarkovVector& a, const MarkovVector& b) {
  return (a.values - b.values).cwiseAbs().maxCoeff();
}

StateSpace similar(const StateSpace& ss, const Eigen::MatrixXd& s) {
  StateSpace out;
  const Eigen::MatrixXd si = s.inverse();
  out.a = s * ss.a * si;
  out.b = s * ss.b;
  out.c = ss.c * si;
  return out;
}

}  // namespace

TEST(StackInputs, SingleWindow) {
  const auto s = stack_inputs(column({1.0, 2.0}), 2);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].time, 2u);
  EXPECT_EQ(s[0].covariate, Eigen::Vector2d(2.0, 1.0));
}

TEST(StackInputs, DropsTrailingSamples) {
  const auto s = stack_inputs(column({1.0, 2.0, 3.0, 4.0, 5.0}), 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].covariate, Eigen::Vector2d(2.0, 1.0));
  EXPECT_EQ(s[1].time, 4u);
  EXPECT_EQ(s[1].covariate, Eigen::Vector2d(4.0, 3.0));
}

TEST(StackInputs, IndexOracle) {
  Rng rng(0);
  const Eigen::MatrixXd u = gaussian_matrix(rng, 20, 2);
  const auto s = stack_inputs(u, 4);
  ASSERT_EQ(s.size(), 5u);
  for (std::size_t j = 0; j < s.size(); ++j) {
    const std::size_t t = 4 * (j + 1);
    EXPECT_EQ(s[j].time, t);
    for (std::size_t lag = 1; lag <= 4; ++lag)
      for (Eigen::Index c = 0; c < 2; ++c)
        EXPECT_EQ(s[j].covariate(static_cast<Eigen::Index>(2 * (lag - 1)) + c),
                  u(static_cast<Eigen::Index>(t - lag), c));
  }
}

TEST(StackInputs, TooShort) {
  try {
    stack_inputs(column({1.0}), 2);
    FAIL();
  } catch (const InsufficientLengthError& e) {
    EXPECT_EQ(e.have(), 1u);
    EXPECT_EQ(e.need(), 2u);
  }
}

TEST(StackedRegression, ProvenanceAndPartition) {
  const MixtureModel model = random_mixture({}, 0);
  const TrajectoryDataset ds = generate_dataset(model, 7, 23, {2.0, 0.01, 0.01}, 1);
  const auto st = build_stacked_regression(ds, 5, 2.0, TrajectoryPartition::halves(7));
  ASSERT_EQ(st.provenance.size(), 7u * 4u);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t j = 0; j < st.provenance.size(); ++j) {
    const auto [i, t] = st.provenance[j];
    EXPECT_TRUE(seen.insert({i, t}).second);
    EXPECT_EQ(t % 5, 0u);
    EXPECT_EQ(st.data.responses(static_cast<Eigen::Index>(j)),
              ds.trajectories[i].outputs(static_cast<Eigen::Index>(t - 1)));
    EXPECT_DOUBLE_EQ(st.data.covariates(static_cast<Eigen::Index>(j), 0),
                     ds.trajectories[i].inputs(static_cast<Eigen::Index>(t - 1), 0) / 2.0);
  }
  // Samples of one trajectory use disjoint raw input indices.
  std::map<std::size_t, std::set<std::size_t>> used;
  for (const auto& [i, t] : st.provenance)
    for (std::size_t lag = 1; lag <= 5; ++lag) EXPECT_TRUE(used[i].insert(t - lag).second);
  // The moment split follows trajectories.
  for (std::size_t j : st.data.second_moment_idx) EXPECT_LT(st.provenance[j].trajectory, 4u);
  for (std::size_t j : st.data.third_moment_idx) EXPECT_GE(st.provenance[j].trajectory, 4u);
  EXPECT_NO_THROW(st.data.validate());
}

TEST(StackedRegression, BadPartition) {
  const TrajectoryDataset ds = generate_dataset(random_mixture({}, 0), 4, 10, {}, 1);
  EXPECT_THROW(build_stacked_regression(ds, 5, 1.0, {{0, 1}, {1, 2, 3}}), ValidationError);
  EXPECT_THROW(build_stacked_regression(ds, 5, 1.0, {{0, 1}, {2}}), ValidationError);
  EXPECT_THROW(build_stacked_regression(ds, 5, 1.0, {{0, 1}, {2, 9}}), ValidationError);
}

TEST(MldsFit, SingleFirComponent) {
  const MixtureModel model({{1.0, fir_system(1.5)}});
  const TrajectoryDataset ds = generate_dataset(model, 200, 30, {1.0, 0.0, 0.0}, 2);
  FitOptions o;
  o.horizon = 3;
  o.k = 1;
  const MarkovEstimate est = mlds_fit(ds, o);
  ASSERT_EQ(est.size(), 1u);
  EXPECT_LT(max_markov_error(est.components[0], MarkovVector(3, 1, Eigen::Vector3d(1.5, 0, 0))),
            0.05);
  EXPECT_NEAR(est.weights(0), 1.0, 0.1);
}

TEST(MldsFit, SingleFirComponentIsConsistent) {
  const MixtureModel model({{1.0, fir_system(1.5)}});
  std::vector<double> errs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TrajectoryDataset ds = generate_dataset(model, 200'000, 30, {1.0, 0.0, 0.0}, seed);
    FitOptions o;
    o.horizon = 3;
    o.k = 1;
    errs.push_back(
        max_markov_error(mlds_fit(ds, o).components[0], MarkovVector(3, 1, Eigen::Vector3d(1.5, 0, 0))));
  }
  EXPECT_LT(median(errs), 0.05);
}

TEST(MldsFit, DefaultConfigurationShape) {
  const MixtureModel model = random_mixture({}, 3);
  const TrajectoryDataset ds = generate_dataset(model, 1000, 96, {}, 4);
  const MarkovEstimate est = mlds_fit(ds, {});
  ASSERT_EQ(est.size(), 3u);
  for (const auto& g : est.components) {
    EXPECT_EQ(g.horizon, 7u);
    EXPECT_EQ(g.values.size(), 7);
  }
  EXPECT_TRUE(est.weights.allFinite());
}

TEST(MldsFit, ArgumentErrors) {
  const TrajectoryDataset ds = generate_dataset(random_mixture({}, 0), 4, 5, {}, 1);
  FitOptions o;
  o.horizon = 7;
  EXPECT_THROW(mlds_fit(ds, o), InsufficientLengthError);
  o.horizon = 2;
  o.k = 3;
  EXPECT_THROW(mlds_fit(ds, o), ValidationError);
  o.k = 0;
  EXPECT_THROW(mlds_fit(ds, o), ValidationError);
  TrajectoryDataset one = ds;
  one.trajectories.resize(1);
  o.k = 1;
  EXPECT_THROW(mlds_fit(one, o), ValidationError);
}

TEST(MldsFit, InvariantToInputScale) {
  MixtureSpec spec;
  spec.k = 2;
  const MixtureModel model = random_mixture(spec, 5);
  for (double c : {0.5, 3.0}) {
    const TrajectoryDataset base = generate_dataset(model, 300, 42, {1.0, 0.0, 0.0}, 6);
    const TrajectoryDataset scaled = generate_dataset(model, 300, 42, {c, 0.0, 0.0}, 6);
    FitOptions o;
    o.k = 2;
    const MarkovEstimate a = mlds_fit(base, o);
    o.sigma_u = c;
    const MarkovEstimate b = mlds_fit(scaled, o);
    for (std::size_t k = 0; k < 2; ++k)
      EXPECT_LT(max_markov_error(a.components[k], b.components[k]), 1e-10);
    EXPECT_LT((a.weights - b.weights).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(MldsFitRefined, KeepsComponentsAndNormalizesWeights) {
  const MixtureModel model = random_mixture({}, 7);
  const TrajectoryDataset ds = generate_dataset(model, 500, 96, {}, 8);
  const MarkovEstimate a = mlds_fit(ds, {});
  const MarkovEstimate b = mlds_fit_refined(ds, {});
  for (std::size_t k = 0; k < a.size(); ++k)
    EXPECT_EQ(a.components[k].values, b.components[k].values);
  EXPECT_NEAR(b.weights.sum(), 1.0, 1e-12);
  EXPECT_GE(b.weights.minCoeff(), 0.0);
}

TEST(OlsMarkov, NoiselessFirIsExact) {
  StateSpace ss = fir_system(2.0);
  const Trajectory tr = rollout(ss, 40, {1.0, 0.0, 0.0}, 10);
  const OlsResult r = ols_markov(tr, 4);
  EXPECT_FALSE(r.rank_deficient);
  EXPECT_LT((r.markov.values - Eigen::Vector4d(2.0, 0, 0, 0)).norm(), 1e-8);
}

TEST(OlsMarkov, ZeroOutputsGiveZero) {
  Trajectory tr = rollout(fir_system(1.0), 20, {}, 1);
  tr.outputs.setZero();
  EXPECT_EQ(ols_markov(tr, 3).markov.values.norm(), 0.0);
}

TEST(OlsMarkov, ShortTrajectoryIsRankDeficient) {
  const Trajectory tr = rollout(fir_system(1.0), 8, {}, 1);
  const OlsResult r = ols_markov(tr, 7);
  EXPECT_TRUE(r.rank_deficient);
  EXPECT_TRUE(r.markov.values.allFinite());
  EXPECT_THROW(ols_markov(tr, 9), InsufficientLengthError);
}

TEST(OlsMarkov, LongTrajectoriesAreAccurate) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const StateSpace ss = random_stable_system(3, 1, 0.7, seed);
    const Trajectory tr = rollout(ss, 960, {}, seed + 50);
    total += (ols_markov(tr, 7).markov.values - impulse_response(ss, 7).values).norm();
  }
  EXPECT_LT(total / 10.0, 0.1);
}

TEST(HoKalman, ScalarGeometric) {
  const MarkovVector g(3, 1, Eigen::Vector3d(1.0, 0.5, 0.25));
  const HoKalmanResult r = ho_kalman(g, 1);
  EXPECT_FALSE(r.order_mismatch);
  EXPECT_NEAR(r.system.a(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(r.system.b(0, 0) * r.system.c(0), 1.0, 1e-12);
}

TEST(HoKalman, RoundTripsRandomSystems) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const StateSpace ss = random_stable_system(3, 1 + seed % 2, 0.8, seed);
    const MarkovVector g = impulse_response(ss, 7);
    const HoKalmanResult r = ho_kalman(g, 3);
    EXPECT_LT(max_markov_error(impulse_response(r.system, 7), g), 1e-8) << "seed " << seed;
    EXPECT_LT(max_markov_error(impulse_response(r.system, 20), impulse_response(ss, 20)), 1e-6);
  }
}

TEST(HoKalman, LowerOrderTruthIsFlagged) {
  StateSpace first_order = fir_system(1.0);
  first_order.a(0, 0) = 0.5;
  const MarkovVector g = impulse_response(first_order, 7);
  const HoKalmanResult r = ho_kalman(g, 3);
  EXPECT_TRUE(r.order_mismatch);
  EXPECT_EQ(r.system.order(), 3);
  EXPECT_LT(max_markov_error(impulse_response(r.system, 7), g), 1e-10);
}

TEST(HoKalman, InvariantUnderSimilarity) {
  Rng rng(11);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const StateSpace ss = random_stable_system(3, 1, 0.8, seed);
    Eigen::MatrixXd s = gaussian_matrix(rng, 3, 3) + 3.0 * Eigen::Matrix3d::Identity();
    const StateSpace tr = similar(ss, s);
    const HoKalmanResult a = ho_kalman(impulse_response(ss, 7), 3);
    const HoKalmanResult b = ho_kalman(impulse_response(tr, 7), 3);
    EXPECT_LT((a.hankel_singular_values - b.hankel_singular_values).norm(),
              1e-8 * a.hankel_singular_values(0));
    EXPECT_LT(max_markov_error(impulse_response(a.system, 12), impulse_response(b.system, 12)),
              1e-8);
  }
}

TEST(HoKalman, RejectsShortHorizon) {
  EXPECT_THROW(ho_kalman(MarkovVector(4, 1, Eigen::Vector4d::Ones()), 2), ValidationError);
  EXPECT_THROW(ho_kalman(MarkovVector(4, 1, Eigen::Vector4d::Ones()), 0), ValidationError);
}
