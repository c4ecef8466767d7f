#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "bdlab/errors.hpp"
#include "bdlab/lq.hpp"

using namespace bdlab;

namespace {

std::shared_ptr<lq::Coefficients> pure_quadrature_coeffs(double C, double H, double T) {
    auto co = lq::scalar_benchmark(T, 0.0, 1.0);
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    co->control_gain = lq::TimeTable<Eigen::MatrixXd>::constant(0.0 * one);
    co->state_cost = lq::TimeTable<Eigen::MatrixXd>::constant(C * one);
    co->terminal_state_cost = H * one;
    return co;
}

}  // namespace

TEST_CASE("scalar benchmark has the hyperbolic-tangent solution") {
    auto co = lq::scalar_benchmark(1.0, 0.5, 1.0);
    const auto sol = lq::solve_riccati(co, 2000);
    CHECK(std::abs(sol.quad.front()(0, 0) - std::tanh(1.0)) < 1e-6);

    const auto fine = lq::solve_riccati(co, 4000);
    CHECK(std::abs(sol.quad.front()(0, 0) - fine.quad.front()(0, 0)) < 1e-8);

    // mass coefficient integrates vol^2 * quad backward: log cosh
    CHECK(std::abs(sol.mass.front() - std::log(std::cosh(1.0))) < 1e-6);
    CHECK(sol.mass_sq.front() == 0.0);

    // terminal conditions
    CHECK(sol.quad.back()(0, 0) == 0.0);
    CHECK(sol.mass.back() == 0.0);
}

TEST_CASE("without control leverage the quadratic coefficient is a plain quadrature") {
    auto co = pure_quadrature_coeffs(0.7, 0.4, 2.0);
    const auto sol = lq::solve_riccati(co, 1000);
    for (size_t i = 0; i < sol.tgrid.size(); ++i) {
        const double expected = 0.4 + 0.7 * (2.0 - sol.tgrid[i]);
        CHECK(sol.quad[i](0, 0) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("mass coefficients solve their linear equations") {
    // zero state costs make the quadratic coefficient vanish; the two scalar
    // coefficients then have elementary solutions
    auto co = lq::scalar_benchmark(1.0, 0.8, 1.0);
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    co->state_cost = lq::TimeTable<Eigen::MatrixXd>::constant(0.0 * one);
    co->terminal_state_cost = 0.0 * one;
    co->mass_cost = lq::TimeTable<double>::constant(2.0);
    co->terminal_mass_sq_cost = 0.5;
    Eigen::VectorXd p(3);
    p << 0.3, 0.2, 0.5;  // mean shift 0.2, second moment 0.8
    co->offspring = lq::TimeTable<Eigen::VectorXd>::constant(p);

    const auto sol = lq::solve_riccati(co, 4000);
    for (size_t i = 0; i < sol.tgrid.size(); ++i) CHECK(std::abs(sol.quad[i](0, 0)) < 1e-14);

    const double g = 0.8, m1 = 0.2, m2 = 0.8, c = 2.0, h = 0.5, T = 1.0;
    const double a = 2.0 * g * m1;
    auto msq_exact = [&](double t) { return (h + c / a) * std::exp(a * (T - t)) - c / a; };
    CHECK(sol.mass_sq.front() == doctest::Approx(msq_exact(0.0)).epsilon(1e-9));
    CHECK(sol.mass_sq[2000] == doctest::Approx(msq_exact(sol.tgrid[2000])).epsilon(1e-9));

    // independent fine integration of the remaining linear equation
    double pbar = 0.0;
    const int n = 400000;
    const double dt = T / n;
    for (int i = 0; i < n; ++i) {
        const double t = T - dt * i;
        const double mid = pbar + 0.5 * dt * (g * m1 * pbar + g * m2 * msq_exact(t));
        pbar += dt * (g * m1 * mid + g * m2 * msq_exact(t - 0.5 * dt));
    }
    CHECK(sol.mass.front() == doctest::Approx(pbar).epsilon(1e-6));
}

TEST_CASE("candidate value at the horizon reproduces the terminal cost") {
    auto co = lq::scalar_benchmark(1.0, 0.0, 1.0);
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    co->terminal_state_cost = 2.0 * one;
    co->terminal_mass_sq_cost = 0.25;
    const auto sol = lq::solve_riccati(co, 500);

    const AtomicMeasure zero(1);
    CHECK(lq::value(sol, 0.37, zero) == 0.0);

    const AtomicMeasure dirac = AtomicMeasure::embed(1, {{1.5}});
    CHECK(lq::value(sol, 1.0, dirac) == doctest::Approx(2.0 * 1.5 * 1.5 + 0.25));

    CHECK_THROWS_AS(lq::value(sol, 1.5, dirac), std::invalid_argument);
    CHECK_THROWS_AS(lq::value(sol, -0.5, dirac), std::invalid_argument);
}

TEST_CASE("feedback is the negated gain times the state") {
    auto co = lq::scalar_benchmark(1.0, 0.0, 1.0);
    const auto sol = lq::solve_riccati(co, 2000);
    Vec out;
    lq::feedback_action(sol, 0.0, {1.0}, out);
    CHECK(out[0] == doctest::Approx(-std::tanh(1.0)).epsilon(1e-6));
    lq::feedback_action(sol, 0.0, {0.0}, out);
    CHECK(out[0] == 0.0);

    // zero quadratic coefficient means zero feedback
    auto flat = pure_quadrature_coeffs(0.0, 0.0, 1.0);
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    flat->control_gain = lq::TimeTable<Eigen::MatrixXd>::constant(one);
    const auto zero_sol = lq::solve_riccati(flat, 200);
    lq::feedback_action(zero_sol, 0.5, {3.0}, out);
    CHECK(out[0] == 0.0);
}

TEST_CASE("multivariate solve keeps the quadratic coefficient positive semidefinite") {
    auto co = std::make_shared<lq::Coefficients>();
    co->dim_x = 2;
    co->dim_action = 1;
    co->horizon = 1.5;
    Eigen::MatrixXd B(2, 2), K(2, 1), C(2, 2), H(2, 2);
    B << 0.1, 0.3, -0.2, 0.0;
    K << 1.0, 0.5;
    C << 1.0, 0.2, 0.2, 0.5;
    H << 0.5, 0.0, 0.0, 0.2;
    co->state_gain = lq::TimeTable<Eigen::MatrixXd>::constant(B);
    co->control_gain = lq::TimeTable<Eigen::MatrixXd>::constant(K);
    co->vol = lq::TimeTable<double>::constant(0.7);
    co->rate = lq::TimeTable<double>::constant(0.4);
    Eigen::VectorXd p(3);
    p << 0.5, 0.0, 0.5;
    co->offspring = lq::TimeTable<Eigen::VectorXd>::constant(p);
    co->state_cost = lq::TimeTable<Eigen::MatrixXd>::constant(C);
    co->mass_cost = lq::TimeTable<double>::constant(0.1);
    co->control_cost = lq::TimeTable<Eigen::MatrixXd>::constant(Eigen::MatrixXd::Identity(1, 1));
    co->terminal_state_cost = H;
    co->terminal_mass_sq_cost = 0.0;

    // the solver checks positive semidefiniteness at every node internally
    const auto sol = lq::solve_riccati(co, 1500);
    for (const auto& q : sol.quad) {
        CHECK((q - q.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
        CHECK(es.eigenvalues().minCoeff() > -1e-8);
    }
    // gains have action-by-state shape
    CHECK(sol.gain.front().rows() == 1);
    CHECK(sol.gain.front().cols() == 2);
}

TEST_CASE("invalid cost matrices are rejected") {
    auto co = lq::scalar_benchmark(1.0, 0.0, 1.0);
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);

    SUBCASE("indefinite control cost") {
        co->control_cost = lq::TimeTable<Eigen::MatrixXd>::constant(-1.0 * one);
        CHECK_THROWS_AS(lq::solve_riccati(co, 100), ConfigError);
    }
    SUBCASE("negative state cost") {
        co->state_cost = lq::TimeTable<Eigen::MatrixXd>::constant(-0.5 * one);
        CHECK_THROWS_AS(lq::solve_riccati(co, 100), ConfigError);
    }
    SUBCASE("asymmetric state cost") {
        Eigen::MatrixXd bad(2, 2);
        bad << 1.0, 0.5, -0.5, 1.0;
        auto multi = std::make_shared<lq::Coefficients>(*co);
        multi->dim_x = 2;
        Eigen::MatrixXd twoByTwo = Eigen::MatrixXd::Zero(2, 2);
        multi->state_gain = lq::TimeTable<Eigen::MatrixXd>::constant(twoByTwo);
        multi->control_gain = lq::TimeTable<Eigen::MatrixXd>::constant(Eigen::MatrixXd::Zero(2, 1));
        multi->state_cost = lq::TimeTable<Eigen::MatrixXd>::constant(bad);
        multi->terminal_state_cost = Eigen::MatrixXd::Zero(2, 2);
        CHECK_THROWS_AS(lq::solve_riccati(multi, 100), ConfigError);
    }
    SUBCASE("offspring probabilities must sum to one") {
        Eigen::VectorXd p(2);
        p << 0.4, 0.4;
        co->offspring = lq::TimeTable<Eigen::VectorXd>::constant(p);
        CHECK_THROWS_AS(lq::solve_riccati(co, 100), ConfigError);
    }
}

TEST_CASE("scenario built from the coefficients passes its bound spot-check") {
    auto co = lq::scalar_benchmark(1.0, 0.2, 0.8);
    const Scenario scn = lq::scenario(co);
    CHECK(spot_check_bounds(scn, 300, 5).empty());
    CHECK(scn.bounds.rate_bound == doctest::Approx(0.2));
    CHECK(scn.bounds.control_coercivity == doctest::Approx(1.0));
}

TEST_CASE("value process drift vanishes under the matched feedback") {
    // moderate-size statistical check; the acceptance suite runs the strict one
    auto co = lq::scalar_benchmark(1.0, 0.5, 1.0);
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    co->terminal_state_cost = one;  // make the feedback nonzero near the horizon
    auto sol = std::make_shared<const lq::RiccatiSolution>(lq::solve_riccati(co, 2000));
    const Scenario scn = lq::scenario(co);
    const Policy opt = lq::optimal_policy(sol);
    const AtomicMeasure init = AtomicMeasure::embed(1, {{1.0}});
    SimConfig cfg;
    cfg.horizon = 1.0;
    cfg.dt_max = 2e-3;

    const auto mart =
        submartingale_test(scn, opt, 0.0, init, lq::value_field(sol), cfg, 3000,
                           {0.25, 0.5, 0.75, 1.0}, DriftMode::Martingale, 909);
    CHECK(mart.pass(4.0));

    const auto sub =
        submartingale_test(scn, Policy::zero(1), 0.0, init, lq::value_field(sol), cfg, 3000,
                           {0.25, 0.5, 0.75, 1.0}, DriftMode::Submartingale, 909);
    CHECK(sub.pass(4.0));
    CHECK(sub.total_drift > 0.0);

    // a perturbed policy pays exactly the squared control distance
    const Policy pert = lq::perturbed_policy(sol, 0.5);
    const auto sub2 =
        submartingale_test(scn, pert, 0.0, init, lq::value_field(sol), cfg, 3000,
                           {0.25, 0.5, 0.75, 1.0}, DriftMode::Submartingale, 909);
    CHECK(sub2.pass(4.0));
    CHECK(sub2.total_drift > 0.0);
}

TEST_CASE("csv export carries one row per node") {
    auto co = lq::scalar_benchmark(1.0, 0.0, 1.0);
    const auto sol = lq::solve_riccati(co, 10);
    std::ostringstream os;
    lq::write_csv(sol, os);
    const std::string text = os.str();
    size_t lines = 0;
    for (char ch : text)
        if (ch == '\n') ++lines;
    CHECK(lines == 12);  // header + 11 nodes
    CHECK(text.rfind("t,quad_00,mass_sq,mass", 0) == 0);
}
