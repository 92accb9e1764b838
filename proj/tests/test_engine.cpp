#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "fedsim/analysis.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/engine.hpp"
#include "support/oracles.hpp"

using namespace fedsim;

namespace {

Problem two_point_problem() {
  // f_i(x) = (x - a_i)^2 / 2 with a = (1, -1); minimizer 0.
  std::vector<ClientObjective> clients;
  clients.push_back(ClientObjective::quadratic_diag(Vec{1.0}, Vec{1.0}));
  clients.push_back(ClientObjective::quadratic_diag(Vec{1.0}, Vec{-1.0}));
  return make_problem(std::move(clients));
}

FederatedState state_at(const Problem& p, const Vec& x0) { return make_state(p, x0); }

double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

std::vector<Vec> zero_sum_controls(const Problem& p, SeededGenerator& g) {
  std::vector<Vec> h(static_cast<std::size_t>(p.n()), Vec(static_cast<std::size_t>(p.d), 0.0));
  for (int j = 0; j < p.d; ++j) {
    double sum = 0.0;
    for (int i = 0; i + 1 < p.n(); ++i) {
      const double v = 2.0 * g.next_unit() - 1.0;
      h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
      sum += v;
    }
    h[static_cast<std::size_t>(p.n() - 1)][static_cast<std::size_t>(j)] = -sum;
  }
  return h;
}

}  // namespace

TEST_SUITE_BEGIN("engine");

TEST_CASE("params validation names the violated condition") {
  const Problem p = two_point_problem();  // L = 1
  AlgoParams a = recommended_params(p, 2, 1.0);

  AlgoParams bad = a;
  bad.gamma = 2.5;
  CHECK_THROWS_WITH_AS(validate_params(bad, p), doctest::Contains("gamma"),
                       std::invalid_argument);
  bad = a;
  bad.chi = 1.5;
  CHECK_THROWS_WITH_AS(validate_params(bad, p), doctest::Contains("chi"), std::invalid_argument);
  bad = a;
  bad.p = 0.0;
  CHECK_THROWS_WITH_AS(validate_params(bad, p), doctest::Contains("p must"),
                       std::invalid_argument);
  bad = a;
  bad.s = 1;
  CHECK_THROWS_WITH_AS(validate_params(bad, p), doctest::Contains("s must"),
                       std::invalid_argument);
  bad = a;
  bad.eta = 0.0;  // reduction runs rely on this being allowed
  CHECK_NOTHROW(validate_params(bad, p));
}

TEST_CASE("tamuna hand-worked round") {
  const Problem p = two_point_problem();
  AlgoParams a;
  a.gamma = 0.5;
  a.p = 1.0;
  a.chi = 1.0;
  a.eta = 1.0;
  a.s = 2;
  validate_params(a, p);

  FederatedState st = state_at(p, Vec{0.0});
  tamuna_round(st, p, a, ParticipationPlan{{0, 1}, 1});

  CHECK(st.x[0][0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(st.x[1][0] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(st.xbar[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(st.h[0][0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(st.h[1][0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(st.control_sum_residual() <= 1e-15);
  CHECK(st.comm_rounds == 1);
  CHECK(st.total_local_steps == 1);
}

TEST_CASE("tamuna fixed point is invariant") {
  const Problem p = synthesize_quadratic(4, 3, 20.0, 5);
  const ReferencePoint ref = solve_reference(p);
  AlgoParams a = recommended_params(p, 3, 0.5);
  a.gamma = 0.8 / p.L;
  a.eta = a.p * a.chi;

  FederatedState st = state_at(p, ref.x_star);
  st.h = ref.h_star;
  DrawStreams streams = DrawStreams::from_seed(3);
  for (int r = 0; r < 20; ++r) {
    const auto plan = next_plan_geometric(streams, p.n(), a.s, a.p);
    tamuna_round(st, p, a, plan);
    CHECK(max_abs_diff(st.xbar, ref.x_star) <= 1e-12);
    for (int i = 0; i < p.n(); ++i)
      CHECK(max_abs_diff(st.h[static_cast<std::size_t>(i)],
                         ref.h_star[static_cast<std::size_t>(i)]) <= 1e-12);
  }
}

TEST_CASE("tamuna with one local step, full participation, eta=0 is gd") {
  const Problem p = synthesize_quadratic(5, 2, 12.0, 8);
  AlgoParams a = recommended_params(p, p.n(), 1.0);
  a.eta = 0.0;
  a.local_steps_mode = LocalStepsMode::fixed;
  a.fixed_steps = 1;

  FederatedState tam = state_at(p, Vec(2, 3.0));
  FederatedState gd = state_at(p, Vec(2, 3.0));
  std::vector<int> everyone{0, 1, 2, 3, 4};
  for (int r = 0; r < 1000; ++r) {
    tamuna_round(tam, p, a, ParticipationPlan{everyone, 1});
    gd_step(gd, p, a.gamma);
    CHECK(max_abs_diff(tam.xbar, gd.xbar) <= 1e-12);
    for (const Vec& hi : tam.h) CHECK(norm(hi) == 0.0);
  }
}

TEST_CASE("gd on the symmetric pair with gamma = 1/L converges in one step") {
  const Problem p = two_point_problem();
  FederatedState st = state_at(p, Vec{5.0});
  gd_step(st, p, 1.0);
  CHECK(st.xbar[0] == doctest::Approx(0.0).epsilon(1e-15));
  gd_step(st, p, 1.0);  // already at the minimizer: stays
  CHECK(st.xbar[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(gd_step(st, p, 2.5), std::invalid_argument);
}

TEST_CASE("single loop step with theta=0 is a pure local pass") {
  const Problem p = synthesize_quadratic(3, 2, 9.0, 21);
  AlgoParams a = recommended_params(p, 2, 0.5);
  FederatedState st = state_at(p, Vec(2, 1.0));
  SeededGenerator g(4);
  st.h = zero_sum_controls(p, g);
  const auto h_before = st.h;
  const auto xbar_before = st.xbar;

  single_loop_step(st, p, a, false, nullptr);

  CHECK(st.h == h_before);
  CHECK(st.xbar == xbar_before);
  CHECK(st.comm_rounds == 0);
  for (int i = 0; i < p.n(); ++i) {
    Vec expect = xbar_before;  // all clients started from xbar
    Vec grad = p.clients[static_cast<std::size_t>(i)].grad(xbar_before);
    for (std::size_t j = 0; j < expect.size(); ++j)
      expect[j] += a.gamma * (h_before[static_cast<std::size_t>(i)][j] - grad[j]);
    CHECK(max_abs_diff(st.x[static_cast<std::size_t>(i)], expect) <= 1e-15);
  }
}

TEST_CASE("single loop rejects inconsistent theta/omega") {
  const Problem p = two_point_problem();
  AlgoParams a = recommended_params(p, 2, 1.0);
  FederatedState st = state_at(p, Vec{1.0});
  const std::vector<int> omega{0, 1};
  CHECK_THROWS_AS(single_loop_step(st, p, a, false, &omega), std::invalid_argument);
  CHECK_THROWS_AS(single_loop_step(st, p, a, true, nullptr), std::invalid_argument);
}

TEST_CASE("full-participation communication applies the control factor to all clients") {
  const Problem p = synthesize_quadratic(4, 2, 6.0, 13);
  AlgoParams a = recommended_params(p, 4, 0.4);
  FederatedState st = state_at(p, Vec(2, 2.0));
  const std::vector<int> omega{0, 1, 2, 3};
  single_loop_step(st, p, a, true, &omega);

  // Every h_i moved by (p*chi/gamma)(xbar - xhat_i) and every x_i is xbar.
  for (int i = 0; i < 4; ++i) {
    CHECK(st.x[static_cast<std::size_t>(i)] == st.xbar);
    CHECK(norm(st.h[static_cast<std::size_t>(i)]) > 0.0);
  }
  CHECK(st.control_sum_residual() <= 1e-12);
}

TEST_CASE("tamuna and the single loop share trajectories under shared plans") {
  for (int s : {5, 3, 2}) {  // full and partial participation
    const Problem p = synthesize_quadratic(5, 3, 30.0, 42);
    AlgoParams a = recommended_params(p, s, 0.5);
    validate_params(a, p);

    DrawStreams tam_streams = DrawStreams::from_seed(90);
    DrawStreams sl_streams = DrawStreams::from_seed(90);
    FederatedState tam = state_at(p, Vec(3, 1.5));
    FederatedState sl = state_at(p, Vec(3, 1.5));

    for (int r = 0; r < 60; ++r) {
      const auto plan_a = next_plan_geometric(tam_streams, p.n(), s, a.p);
      const auto plan_b = next_plan_geometric(sl_streams, p.n(), s, a.p);
      REQUIRE(plan_a.omega == plan_b.omega);
      REQUIRE(plan_a.local_steps == plan_b.local_steps);

      tamuna_round(tam, p, a, plan_a);
      for (long l = 0; l + 1 < plan_b.local_steps; ++l) single_loop_step(sl, p, a, false, nullptr);
      single_loop_step(sl, p, a, true, &plan_b.omega);

      CHECK(max_abs_diff(tam.xbar, sl.xbar) <= 1e-12);
      for (int i = 0; i < p.n(); ++i)
        CHECK(max_abs_diff(tam.h[static_cast<std::size_t>(i)],
                           sl.h[static_cast<std::size_t>(i)]) <= 1e-12);
    }
  }
}

TEST_CASE("control-variate sum is conserved across long partial-participation runs") {
  const Problem p = synthesize_quadratic(6, 2, 15.0, 17);
  AlgoParams a = recommended_params(p, 3, 0.35);
  FederatedState st = state_at(p, Vec(2, 2.0));
  DrawStreams streams = DrawStreams::from_seed(55);
  for (int r = 0; r < 500; ++r) {
    tamuna_round(st, p, a, next_plan_geometric(streams, p.n(), a.s, a.p));
    CHECK(st.control_sum_residual() <= 1e-10);
  }
}

TEST_CASE("idle clients do no work and exchange no messages") {
  const Problem p = synthesize_quadratic(6, 2, 15.0, 18);
  AlgoParams a = recommended_params(p, 2, 0.5);
  FederatedState st = state_at(p, Vec(2, 1.0));
  DrawStreams streams = DrawStreams::from_seed(66);
  for (int r = 0; r < 100; ++r) {
    const auto plan = next_plan_geometric(streams, p.n(), a.s, a.p);
    const auto evals = st.grad_evals;
    const auto up = st.uplink;
    const auto down = st.downlink;
    const auto h_before = st.h;
    tamuna_round(st, p, a, plan);
    std::size_t k = 0;
    for (int i = 0; i < p.n(); ++i) {
      const std::size_t ui = static_cast<std::size_t>(i);
      const bool active = k < plan.omega.size() && plan.omega[k] == i;
      if (active) {
        ++k;
        CHECK(st.grad_evals[ui] == evals[ui] + plan.local_steps);
      } else {
        CHECK(st.grad_evals[ui] == evals[ui]);
        CHECK(st.uplink[ui] == up[ui]);
        CHECK(st.downlink[ui] == down[ui]);
        CHECK(st.h[ui] == h_before[ui]);
      }
    }
  }
}

TEST_CASE("scaffold with one local step and zero controls is a gd step") {
  const Problem p = synthesize_quadratic(4, 2, 10.0, 23);
  const double lr = 0.5 / p.L;
  FederatedState sc = state_at(p, Vec(2, 1.0));
  FederatedState gd = state_at(p, Vec(2, 1.0));
  scaffold_round(sc, p, lr, 1, {0, 1, 2, 3});
  gd_step(gd, p, lr);
  CHECK(max_abs_diff(sc.xbar, gd.xbar) <= 1e-15);
}

TEST_CASE("scaffold fixed point is invariant") {
  const Problem p = synthesize_quadratic(5, 2, 10.0, 29);
  const ReferencePoint ref = solve_reference(p);
  Vec grad_at_star = p.grad(ref.x_star);

  FederatedState st = state_at(p, ref.x_star);
  for (int i = 0; i < p.n(); ++i) {
    st.h[static_cast<std::size_t>(i)] = ref.h_star[static_cast<std::size_t>(i)];
    axpy(-1.0, grad_at_star, st.h[static_cast<std::size_t>(i)]);
  }
  st.scaffold_server_c = grad_at_star;  // (1/n) sum c_i at the fixed point

  DrawStreams streams = DrawStreams::from_seed(31);
  for (int r = 0; r < 30; ++r) {
    const auto omega = sample_subset(streams.subsets, p.n(), 3);
    const auto h_before = st.h;
    scaffold_round(st, p, 1.0 / (81.0 * p.L * 4.0), 4, omega);
    CHECK(max_abs_diff(st.xbar, ref.x_star) <= 1e-12);
    for (int i = 0; i < p.n(); ++i)
      CHECK(max_abs_diff(st.h[static_cast<std::size_t>(i)],
                         h_before[static_cast<std::size_t>(i)]) <= 1e-12);
  }
}

TEST_CASE("every algorithm leaves the optimum alone") {
  const Problem p = synthesize_quadratic(4, 3, 25.0, 37);
  const ReferencePoint ref = solve_reference(p);
  AlgoParams a = recommended_params(p, 4, 0.6);

  FederatedState tam = state_at(p, ref.x_star);
  tam.h = ref.h_star;
  tamuna_round(tam, p, a, ParticipationPlan{{0, 1, 2, 3}, 3});
  CHECK(max_abs_diff(tam.xbar, ref.x_star) <= 1e-12);

  FederatedState sl = state_at(p, ref.x_star);
  sl.h = ref.h_star;
  const std::vector<int> everyone{0, 1, 2, 3};
  single_loop_step(sl, p, a, true, &everyone);
  CHECK(max_abs_diff(sl.xbar, ref.x_star) <= 1e-12);

  FederatedState gd = state_at(p, ref.x_star);
  gd_step(gd, p, 1.0 / p.L);
  CHECK(max_abs_diff(gd.xbar, ref.x_star) <= 1e-12);
}

TEST_CASE("serial and openmp paths produce bitwise identical states") {
  const SparseDataset ds = synthesize_logistic_data(120, 12, 3);
  const Problem p = build_logistic_problem(ds, 8, MuRule{MuRule::Kind::relative, 1e-3});
  AlgoParams a = recommended_params(p, 5, 0.3);

  auto run_mode = [&](ExecMode mode) {
    DrawStreams streams = DrawStreams::from_seed(7);
    FederatedState st = state_at(p, Vec(static_cast<std::size_t>(p.d), 0.5));
    for (int r = 0; r < 40; ++r)
      tamuna_round(st, p, a, next_plan_geometric(streams, p.n(), a.s, a.p), mode);
    for (int r = 0; r < 10; ++r) {
      single_loop_step(st, p, a, false, nullptr, mode);
      gd_step(st, p, a.gamma, mode);
      scaffold_round(st, p, a.gamma / 10.0, 3, {0, 2, 4}, mode);
    }
    return st;
  };

  const FederatedState serial = run_mode(ExecMode::serial);
  const FederatedState parallel = run_mode(ExecMode::parallel);
  CHECK(serial.xbar == parallel.xbar);
  CHECK(serial.x == parallel.x);
  CHECK(serial.h == parallel.h);
}

TEST_CASE("control update equals the estimator form") {
  // The h-update written with the participation estimator d and weight
  // p*chi/(gamma*(1+omega)) must match the direct subset form.
  const Problem p = synthesize_quadratic(5, 2, 8.0, 41);
  AlgoParams a = recommended_params(p, 3, 0.5);
  FederatedState st = state_at(p, Vec(2, 1.0));
  SeededGenerator g(11);
  st.h = zero_sum_controls(p, g);

  FederatedState direct = st;
  const std::vector<int> omega{0, 2, 4};
  single_loop_step(direct, p, a, true, &omega);

  // Estimator route, starting from the same state.
  FederatedState est = st;
  single_loop_step(est, p, a, false, nullptr);  // same local pass, no comm
  const double omega_v = omega_var(p.n(), a.s, a.p);
  const auto d = d_estimator(est.x, omega, a.p, true);
  const double w = a.p * a.chi / (a.gamma * (1.0 + omega_v));
  for (int i = 0; i < p.n(); ++i)
    axpy(-w, d[static_cast<std::size_t>(i)], est.h[static_cast<std::size_t>(i)]);

  for (int i = 0; i < p.n(); ++i)
    CHECK(max_abs_diff(direct.h[static_cast<std::size_t>(i)],
                       est.h[static_cast<std::size_t>(i)]) <= 1e-12);
}

TEST_CASE("ergodic tracker over the actually-computed round iterates") {
  const Problem p = synthesize_quadratic(5, 2, 12.0, 61);
  AlgoParams a = recommended_params(p, 3, 0.4);
  FederatedState st = state_at(p, Vec(2, 1.0));
  DrawStreams streams = DrawStreams::from_seed(44);

  ErgodicTracker tracker(p.n(), p.d);
  std::vector<std::vector<Vec>> seen(static_cast<std::size_t>(p.n()));
  const LocalIterateObserver observe = [&](int client, const Vec& x) {
    tracker.observe(client, x);
    seen[static_cast<std::size_t>(client)].push_back(x);
  };
  for (int r = 0; r < 25; ++r)
    tamuna_round(st, p, a, next_plan_geometric(streams, p.n(), a.s, a.p), ExecMode::serial,
                 &observe);

  for (int i = 0; i < p.n(); ++i) {
    const auto& iterates = seen[static_cast<std::size_t>(i)];
    REQUIRE(tracker.count(i) == static_cast<long>(iterates.size()));
    if (iterates.empty()) continue;
    Vec batch(2, 0.0);
    for (const Vec& v : iterates) axpy(1.0, v, batch);
    scal(1.0 / static_cast<double>(iterates.size()), batch);
    CHECK(max_abs_diff(tracker.mean(i), batch) <= 1e-12 * std::max(1.0, norm(batch)));
  }
  // Idle rounds contribute nothing: total observations equal total local
  // steps times the cohort size.
  long total = 0;
  for (int i = 0; i < p.n(); ++i) total += tracker.count(i);
  CHECK(total == st.total_local_steps * a.s);
}

TEST_CASE("one-step conditional contraction on a small quadratic") {
  const Problem p = synthesize_quadratic(4, 2, 10.0, 47);
  const ReferencePoint ref = solve_reference(p);
  const int s = 2;
  const double pr = 0.5;
  AlgoParams a = recommended_params(p, s, pr);
  a.gamma = 1.0 / p.L;
  a.eta = a.p * a.chi;
  const double c = contraction_rate(a.gamma, p.mu, p.L, a.p, a.chi, p.n(), s);
  const LyapunovParams lp{a.gamma, a.p, a.chi, p.n(), s};

  SeededGenerator g(13);
  for (int rep = 0; rep < 20; ++rep) {
    FederatedState st = state_at(p, Vec{2.0 * g.next_unit() - 1.0, 2.0 * g.next_unit() - 1.0});
    for (auto& xi : st.x)
      for (auto& v : xi) v = 2.0 * g.next_unit() - 1.0;
    st.h = zero_sum_controls(p, g);

    const double psi = single_loop_lyapunov(st.x, st.h, lp, ref);
    double expected = 0.0;
    {
      FederatedState tail = st;
      single_loop_step(tail, p, a, false, nullptr);
      expected += (1.0 - pr) * single_loop_lyapunov(tail.x, tail.h, lp, ref);
    }
    const long subsets = oracles::binomial(p.n(), s);
    oracles::for_each_subset(p.n(), s, [&](const std::vector<int>& omega) {
      FederatedState head = st;
      single_loop_step(head, p, a, true, &omega);
      expected += pr / static_cast<double>(subsets) *
                  single_loop_lyapunov(head.x, head.h, lp, ref);
    });
    CHECK(expected <= c * psi + 1e-12);
  }
}

TEST_SUITE_END();
