#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dicke/integrate.hpp"

using dicke::IntegratorConfig;
using dicke::MeanFieldState;
using dicke::ModelParams;

TEST(Integrate, PureDriveIsARigidRotation) {
  // Negligible loss and no coupling: the spin precesses about x at rate omega.
  const ModelParams p{2.0, 0.0, 1e-12};
  IntegratorConfig cfg{1e-3, 3.0, 1000, 0.0};
  const auto traj = dicke::integrate_rk4(MeanFieldState::from(0, 0, 1, 0, 0, 1), p, cfg);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.times[i];
    EXPECT_NEAR(traj.states[i][MeanFieldState::kZA], std::cos(2.0 * t), 1e-10);
    EXPECT_NEAR(traj.states[i][MeanFieldState::kYA], -std::sin(2.0 * t), 1e-10);
  }
}

TEST(Integrate, PureLossFollowsClosedForm) {
  // Omega = Gamma = 0: the A spin stays in the x-z plane with
  // dz/dt = -(1 - z^2), i.e. z(t) = -tanh(t - t0).
  const ModelParams p{0.0, 0.0};
  const double z0 = 0.5;
  const double t0 = std::atanh(-z0);
  IntegratorConfig cfg{1e-3, 5.0, 500, 0.0};
  const auto traj =
      dicke::integrate_rk4(MeanFieldState::from(std::sqrt(1 - z0 * z0), 0, z0, 0, 0, 1), p, cfg);
  for (std::size_t i = 0; i < traj.size(); ++i)
    EXPECT_NEAR(traj.states[i][MeanFieldState::kZA], -std::tanh(traj.times[i] + t0), 1e-11);
}

TEST(Integrate, NormDriftBelowThresholdOverLongHorizon) {
  for (const ModelParams& p : {ModelParams{1.5, 0.1}, ModelParams{2.0, 1.4}, ModelParams{0.5, 0.5}}) {
    IntegratorConfig cfg{1e-3, 1000.0, 1000, 0.0};
    const auto traj = dicke::integrate_rk4(MeanFieldState::tilted_up(0.1, 0.1), p, cfg);
    double drift = 0.0;
    for (const auto& s : traj.states) {
      drift = std::max(drift, std::abs(s.norm_sq_a() - 1.0));
      drift = std::max(drift, std::abs(s.norm_sq_b() - 1.0));
    }
    EXPECT_LT(drift, 1e-8) << p.omega << "," << p.gamma;
  }
}

TEST(Integrate, FourthOrderConvergence) {
  IntegratorConfig cfg{0.02, 10.0, 5, 0.0};
  const auto r = dicke::halve_step_check(MeanFieldState::tilted_up(0.1, 0.1), {1.5, 0.1}, cfg);
  EXPECT_GT(r.ratio, 12.0);
  EXPECT_LT(r.ratio, 20.0);
}

TEST(Integrate, RecordsEveryStrideAndEndpoint) {
  IntegratorConfig cfg{0.01, 1.0, 10, 0.0};
  const auto traj = dicke::integrate_rk4(MeanFieldState::tilted_up(0, 0), {1.0, 0.0}, cfg);
  ASSERT_EQ(traj.size(), 11u);
  EXPECT_DOUBLE_EQ(traj.times.back(), 1.0);
}

TEST(Integrate, RejectsBadConfiguration) {
  const auto s = MeanFieldState::tilted_up(0, 0);
  EXPECT_THROW(dicke::integrate_rk4(s, {1.0, 0.0}, {0.0, 1.0, 1, 0.0}), dicke::PreconditionError);
  EXPECT_THROW(dicke::integrate_rk4(s, {1.0, 0.0}, {0.1, 1.0, 0, 0.0}), dicke::PreconditionError);
  EXPECT_THROW(dicke::integrate_rk4(MeanFieldState::from(1.1, 0, 0, 0, 0, 1), {1.0, 0.0}, {}),
               dicke::PreconditionError);
}

TEST(Integrate, HugeStepReportsNonFiniteState) {
  EXPECT_THROW(dicke::integrate_rk4(MeanFieldState::tilted_up(0.3, 0.2), {2.0, 1.4}, {5.0, 500.0, 1, 0.0}),
               dicke::NonFiniteState);
}

TEST(Integrate, CsvHeaderAndPrecision) {
  IntegratorConfig cfg{0.5, 1.0, 1, 0.0};
  const auto traj = dicke::integrate_rk4(MeanFieldState::tilted_up(0, 0), {1.0, 0.0}, cfg);
  std::ostringstream os;
  dicke::write_csv(os, traj);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,mxA,myA,mzA,mxB,myB,mzB");
  std::getline(is, line);
  EXPECT_EQ(line, "0,0,0,1,0,0,1");
  int rows = 1;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);
}
