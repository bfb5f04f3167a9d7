#include <doctest.h>

#include <cmath>

#include "typeflow/convergence_lab.hpp"
#include "typeflow/environment.hpp"

using namespace typeflow;

namespace {

Eigen::MatrixXd two_state(double a, double b) {
  Eigen::MatrixXd m(2, 2);
  m << -a, a, b, -b;
  return m;
}

EnvPath sin_env() {
  Eigen::MatrixXd base(2, 2), amp(2, 2);
  base << 0, 1.0, 1.0, 0;
  amp << 0, 0.5, -0.5, 0;
  return EnvPath::sinusoid(SinusoidRates{base, amp, 1.0, 0.0});
}

}  // namespace

TEST_SUITE("environment") {
  TEST_CASE("constant evaluation") {
    EnvPath env = EnvPath::constant(validate_rate_matrix(two_state(1, 2)));
    CHECK(env.evaluate(0.7)(0, 1) == doctest::Approx(1.0));
    CHECK(env.min_population() == doctest::Approx(2.0));
  }

  TEST_CASE("piecewise lookup is right-continuous") {
    std::vector<RateMatrix> vals{validate_rate_matrix(two_state(1, 1)),
                                 validate_rate_matrix(two_state(3, 3))};
    EnvPath env = EnvPath::piecewise({1.0}, vals, 2.0);
    CHECK(env.evaluate(0.999)(0, 1) == doctest::Approx(1.0));
    CHECK(env.evaluate(1.0)(0, 1) == doctest::Approx(3.0));
    CHECK_THROWS_AS(env.evaluate(2.5), OutOfHorizon);
  }

  TEST_CASE("sinusoid rates") {
    Eigen::MatrixXd base(2, 2), amp(2, 2);
    base << 0, 1, 1, 0;
    amp << 0, 1, 0, 0;
    EnvPath env = EnvPath::sinusoid(SinusoidRates{base, amp, 1.0, 0.0});
    CHECK(env.evaluate(0.0)(0, 1) == doctest::Approx(1.0));  // sin 0 = 0
    CHECK(env.evaluate(3.14159265358979 / 2)(0, 1) == doctest::Approx(2.0));
    // base must dominate the amplitude
    amp(0, 1) = 1.5;
    CHECK_THROWS_AS(EnvPath::sinusoid(SinusoidRates{base, amp, 1.0, 0.0}),
                    ValidationError);
  }

  TEST_CASE("discretize of a constant env is constant") {
    EnvPath env = EnvPath::constant(validate_rate_matrix(two_state(1, 2)));
    StepEnvPath step = discretize(env, 7, 2.0);
    for (long long k = 0; k < step.steps(); ++k)
      CHECK(step.value_at_step(k).entries().isApprox(two_state(1, 2)));
  }

  TEST_CASE("discretize samples at k/N") {
    EnvPath env = sin_env();
    StepEnvPath step = discretize(env, 2, 3.0);
    CHECK(step.value_at_step(1).entries().isApprox(
        env.evaluate(0.5).entries()));
  }

  TEST_CASE("discretize is idempotent at matching density") {
    EnvPath env = sin_env();
    StepEnvPath step = discretize(env, 8, 2.0);
    StepEnvPath again = discretize(step.as_env_path(), 8, 2.0);
    REQUIRE(again.steps() == step.steps());
    for (long long k = 0; k < step.steps(); ++k)
      CHECK(again.value_at_step(k).entries().isApprox(
          step.value_at_step(k).entries()));
  }

  TEST_CASE("refinement shrinks d_U and the gap decays like 1/N") {
    EnvPath env = sin_env();
    double u_max = 20.0;
    std::vector<long long> n_list{10, 100, 1000};
    std::vector<double> gaps;
    for (long long n : n_list) {
      StepEnvPath step = discretize(env, n, u_max);
      gaps.push_back(
          path_distance_dU(step.path_view(), env.path_view(), u_max));
    }
    CHECK(gaps[1] < gaps[0] + 1e-9);
    CHECK(gaps[2] < gaps[1] + 1e-9);
    // Lipschitz env: d_U(A_N, A) ~ C/N
    RateFit fit = rate_fit({10.0, 100.0, 1000.0}, gaps);
    CHECK(fit.slope == doctest::Approx(-1.0).epsilon(0.2));

    StepEnvPath fine = discretize(env, 16, u_max);
    StepEnvPath coarse = discretize(env, 8, u_max);
    double d_fine = path_distance_dU(fine.path_view(), env.path_view(), u_max);
    double d_coarse =
        path_distance_dU(coarse.path_view(), env.path_view(), u_max);
    CHECK(d_fine <= d_coarse + 1e-9);
  }

  TEST_CASE("fundamentals map") {
    Eigen::MatrixXd c(2, 2), w(2, 2);
    double c_unit = std::log(std::exp(1.0) - 1.0);  // softplus(c_unit) = 1
    c << 0, c_unit, c_unit, 0;
    w.setZero();
    RateMatrix m = fundamentals_map(0.3, c, w);
    CHECK(m(0, 1) == doctest::Approx(1.0));
    CHECK(m(0, 0) == doctest::Approx(-1.0));
    // constant in h when weights vanish
    CHECK(fundamentals_map(0.6, c, w).entries().isApprox(m.entries()));
    // increasing h with positive weight raises the rate
    w(0, 1) = 2.0;
    double low = fundamentals_map(0.1, c, w)(0, 1);
    double high = fundamentals_map(0.5, c, w)(0, 1);
    CHECK(high > low);
  }

  TEST_CASE("sample_env single state is constant") {
    MarkovSwitchSpec ms;
    ms.states.push_back(validate_rate_matrix(two_state(1, 1)));
    ms.intensity = Eigen::MatrixXd::Zero(1, 1);
    ms.initial_law = Eigen::VectorXd::Ones(1);
    RandomEnvSpec spec{ms};
    Rng rng(5, 0);
    EnvPath env = sample_env(spec, 10.0, rng);
    CHECK(env.breakpoints().empty());
    CHECK(env.evaluate(7.3).entries().isApprox(two_state(1, 1)));
  }

  TEST_CASE("sample_env zero intensity stays at the initial state") {
    MarkovSwitchSpec ms;
    ms.states.push_back(validate_rate_matrix(two_state(1, 1)));
    ms.states.push_back(validate_rate_matrix(two_state(4, 4)));
    ms.intensity = Eigen::MatrixXd::Zero(2, 2);
    ms.initial_law = Eigen::VectorXd(2);
    ms.initial_law << 0.0, 1.0;
    RandomEnvSpec spec{ms};
    Rng rng(6, 0);
    EnvPath env = sample_env(spec, 5.0, rng);
    CHECK(env.breakpoints().empty());
    CHECK(env.evaluate(2.0).entries().isApprox(two_state(4, 4)));
  }

  TEST_CASE("symmetric two-state switching has Poisson-many switches") {
    MarkovSwitchSpec ms;
    ms.states.push_back(validate_rate_matrix(two_state(1, 1)));
    ms.states.push_back(validate_rate_matrix(two_state(4, 4)));
    ms.intensity = Eigen::MatrixXd(2, 2);
    ms.intensity << -1, 1, 1, -1;
    ms.initial_law = Eigen::VectorXd::Constant(2, 0.5);
    RandomEnvSpec spec{ms};
    const int draws = 10000;
    double total = 0.0;
    for (int i = 0; i < draws; ++i) {
      Rng rng(7, std::uint64_t(i));
      total += double(sample_env(spec, 10.0, rng).breakpoints().size());
    }
    double mean = total / draws;
    double se = std::sqrt(10.0) / std::sqrt(double(draws));
    CHECK(std::abs(mean - 10.0) < 3.0 * se);
  }

  TEST_CASE("ar1 fundamentals env is a valid reproducible step path") {
    Ar1FundamentalsSpec f;
    f.phi = 0.8;
    f.sigma = 0.3;
    f.h0 = 0.0;
    f.density = 8;
    f.offsets = Eigen::MatrixXd::Zero(2, 2);
    f.weights = Eigen::MatrixXd::Zero(2, 2);
    f.weights(0, 1) = 1.0;
    f.weights(1, 0) = -0.5;
    RandomEnvSpec spec{f};
    Rng rng1(8, 3), rng2(8, 3);
    EnvPath a = sample_env(spec, 2.0, rng1);
    EnvPath b = sample_env(spec, 2.0, rng2);
    REQUIRE(a.breakpoints().size() == b.breakpoints().size());
    for (double t : {0.0, 0.4, 1.1, 1.99})
      CHECK(a.evaluate(t).entries().isApprox(b.evaluate(t).entries()));
    // every plateau already passed validate_rate_matrix inside evaluate
    CHECK(a.breakpoints().size() == 16);  // horizon 2 at density 8
  }

  TEST_CASE("every returned matrix revalidates") {
    EnvPath env = sin_env();
    for (double t : {0.0, 0.3, 1.7, 4.0})
      CHECK_NOTHROW(validate_rate_matrix(env.evaluate(t).entries()));
  }
}
