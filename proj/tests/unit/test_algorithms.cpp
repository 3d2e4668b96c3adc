#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>

#include "dfl/cfa.hpp"
#include "dfl/consensus.hpp"
#include "dfl/topology.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace dfl;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

ClientState client_1d(double eta, double lambda, double w, std::shared_ptr<const LossModel> loss) {
  ClientState c;
  c.w = v1(w);
  c.lambda = v1(lambda);
  c.eta = eta;
  c.loss = std::move(loss);
  c.lipschitz = c.loss->weighted_lipschitz();
  return c;
}

std::shared_ptr<const LossModel> zero_loss(Index d = 1) {
  return std::make_shared<const LossModel>(LossModel::quadratic(Matrix::Zero(d, d), Vector::Zero(d)));
}

bool bit_equal(const Vector& a, const Vector& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

// Independent evaluation of the augmented Lagrangian from a flattened snapshot.
double lagrangian_from_snapshot(const Vector& flat, std::span<const LossModel> models,
                                std::span<const double> etas) {
  const Index d = models.front().dimension();
  const auto K = static_cast<Index>(models.size());
  const Vector w = flat.segment(0, d);
  double total = 0.0;
  for (Index k = 0; k < K; ++k) {
    const Vector wk = flat.segment(d * (1 + k), d);
    const Vector lk = flat.segment(d * (1 + K + k), d);
    const Vector diff = wk - w;
    total += models[static_cast<std::size_t>(k)].weighted_value(wk) + lk.dot(diff) +
             0.5 * etas[static_cast<std::size_t>(k)] * diff.squaredNorm();
  }
  return total;
}

struct Setup {
  std::vector<LossModel> models;
  std::vector<double> etas;
  std::vector<int> bounds;
};

Setup random_setup(std::uint64_t seed, std::size_t K, Index d, int max_t, bool logistic = false) {
  Rng rng(seed);
  Setup s;
  s.models = logistic ? gen::logistics(seed, K, d) : gen::quadratics(rng, K, d);
  for (const auto& m : s.models) {
    s.etas.push_back(gen::real(rng, 7.5, 12.0) * m.weighted_lipschitz());
    s.bounds.push_back(gen::integer(rng, 0, max_t));
  }
  return s;
}

}  // namespace

TEST_SUITE("algorithms") {
  TEST_CASE("global update examples") {
    Rng rng(1);
    const Vector v = gen::vector(rng, 3);
    std::vector<ClientState> same;
    for (int k = 0; k < 3; ++k) {
      ClientState c;
      c.w = v;
      c.lambda = Vector::Zero(3);
      c.eta = 1.0 + k;
      c.loss = zero_loss(3);
      same.push_back(c);
    }
    CHECK((consensus_global_update(same, 1e6) - v).norm() <= 1e-15);

    const std::vector<ClientState> two{client_1d(1, 0, 0, zero_loss()), client_1d(1, 0, 2, zero_loss())};
    CHECK(consensus_global_update(two, 1e6)[0] == 1.0);
    CHECK(consensus_global_update(two, 0.5)[0] == 0.5);
  }

  TEST_CASE("global update is stationary for the Lagrangian in w") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      const auto s = random_setup(seed, 4, 3, 0);
      auto clients = initial_clients(s.models, s.etas, s.bounds);
      for (auto& c : clients) {
        c.w = gen::vector(rng, 3);
        c.lambda = gen::vector(rng, 3);
      }
      const Vector w = consensus_global_update(clients, 1e6);
      const Vector g = oracle::central_difference([&](const Vector& x) { return lagrangian_value(clients, x); }, w, 1e-5);
      CHECK(g.norm() <= 1e-8 * std::max(1.0, std::abs(lagrangian_value(clients, w))));
      // Analytic stationarity: sum_k -lambda_k - eta_k (w_k - w) = 0
      Vector a = Vector::Zero(3);
      for (const auto& c : clients) a -= c.lambda + c.eta * (c.w - w);
      CHECK(a.norm() <= 1e-10);
    }
  }

  TEST_CASE("primal step examples") {
    auto loss = std::make_shared<const LossModel>(LossModel::quadratic(Matrix::Identity(1, 1) * 2.0, v1(-1.0)));
    // grad G(w_stale) at w_stale = 1: 2 * (1 - (-1)) = 4
    const auto c = client_1d(2.0, 0.0, 0.0, loss);
    CHECK(primal_step(c, v1(1.0), v1(1.0))[0] == -1.0);

    const auto fixed = client_1d(2.0, -4.0, 0.0, loss);
    CHECK(primal_step(fixed, v1(0.3), v1(1.0))[0] == doctest::Approx(0.3).epsilon(1e-15));

    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
      const auto s = random_setup(rng.next(), 1, 4, 0);
      auto cl = initial_clients(s.models, s.etas, s.bounds).front();
      cl.lambda = gen::vector(rng, 4);
      const Vector wn = gen::vector(rng, 4), ws = gen::vector(rng, 4);
      const Vector wk = primal_step(cl, wn, ws);
      const Vector foc = cl.loss->weighted_gradient(ws) + cl.lambda + cl.eta * (wk - wn);
      CHECK(foc.norm() <= 1e-12 * std::max(1.0, cl.lambda.norm() + cl.eta * wn.norm()));
    }
  }

  TEST_CASE("dual update examples") {
    const auto c = client_1d(2.0, 1.0, 0.0, zero_loss());
    CHECK(dual_update(c, v1(0.7), v1(0.7))[0] == 1.0);
    CHECK(dual_update(c, v1(1.0), v1(0.5))[0] == 2.0);
  }

  TEST_CASE("Lagrangian examples") {
    Rng rng(8);
    const auto s = random_setup(8, 3, 2, 0);
    auto clients = initial_clients(s.models, s.etas, s.bounds);
    const Vector w = gen::vector(rng, 2);
    double expected = 0.0;
    for (auto& c : clients) {
      c.w = w;
      c.lambda = gen::vector(rng, 2, 5.0);
      expected += c.loss->weighted_value(w);
    }
    CHECK(lagrangian_value(clients, w) == doctest::Approx(expected).epsilon(1e-14));

    const std::vector<ClientState> single{client_1d(2.0, 0.0, 1.0, zero_loss())};
    CHECK(lagrangian_value(single, v1(0.0)) == 1.0);
  }

  TEST_CASE("one iteration by hand, 1-D, one client") {
    // G(x) = 1/2 * 2 * (x - 3)^2, eta = 4.
    const std::vector<LossModel> models{LossModel::quadratic(Matrix::Constant(1, 1, 2.0), v1(3.0))};
    const std::vector<double> etas{4.0};
    const std::vector<int> bounds{0};
    auto clients = initial_clients(models, etas, bounds);
    CHECK(clients[0].lambda[0] == 6.0);
    ConsensusEngine engine(clients, v1(0.0), 1e6, DelaySchedule::zero(1));
    const auto rec = engine.step();
    CHECK(engine.w()[0] == 1.5);
    CHECK(engine.clients()[0].w[0] == 0.75);
    CHECK(engine.clients()[0].lambda[0] == 3.0);
    CHECK(rec.lagrangian == doctest::Approx(3.9375).epsilon(1e-15));
    CHECK(rec.dw == 1.5);
    CHECK(rec.dwk[0] == 0.75);
    CHECK(rec.dlambda[0] == 3.0);
    CHECK(rec.version_used[0] == 2);
    CHECK(engine.t() == 2);
  }

  TEST_CASE("dual identity holds on every iteration") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const auto s = random_setup(seed, 4, 3, 4, seed % 2 == 1);
      ConsensusEngine engine(initial_clients(s.models, s.etas, s.bounds), Vector::Zero(3), 1e6,
                             DelaySchedule(DelayKind::uniform_random, s.bounds, seed));
      for (int i = 0; i < 500; ++i) {
        const auto rec = engine.step();
        CHECK(rec.dual_identity_residual <= 1e-10);
      }
    }
  }

  TEST_CASE("zero delay matches the synchronous reference bit for bit") {
    const auto s = random_setup(3, 5, 4, 0);
    const std::vector<int> zeros(5, 0);
    const auto clients = initial_clients(s.models, s.etas, zeros);
    ConsensusEngine engine(clients, Vector::Zero(4), 1e6, DelaySchedule(DelayKind::fixed, zeros, 0, 0));
    const auto a = record_trajectory(engine, 200);
    const auto b = run_sync_reference(clients, Vector::Zero(4), 1e6, 200);
    REQUIRE(a.size() == 200);
    REQUIRE(b.size() == 200);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(bit_equal(a[i], b[i]));
  }

  TEST_CASE("sync reference reaches the linear-solve stationary point with monotone L") {
    const auto s = random_setup(11, 4, 5, 0);
    const auto clients = initial_clients(s.models, s.etas, s.bounds);
    ConsensusEngine engine(clients, Vector::Zero(5), 1e6, DelaySchedule::zero(4));
    double previous = engine.lagrangian();
    for (int i = 0; i < 3000; ++i) {
      const auto rec = engine.step();
      CHECK(rec.lagrangian <= previous + 1e-12 * (1.0 + std::abs(previous)));
      previous = rec.lagrangian;
    }
    const Vector star = oracle::quadratic_stationary_point(s.models);
    CHECK((engine.w() - star).norm() <= 1e-8);
    CHECK(weighted_global_gradient(s.models, engine.w()).norm() <= 1e-8);
  }

  TEST_CASE("trace bookkeeping and snapshot recomputation") {
    const auto s = random_setup(21, 3, 2, 2);
    ConsensusEngine engine(initial_clients(s.models, s.etas, s.bounds), Vector::Zero(2), 1e6,
                           DelaySchedule(DelayKind::uniform_random, s.bounds, 4));
    Iteration expected_t = 1;
    for (int i = 0; i < 37; ++i) {
      const auto rec = engine.step();
      CHECK(rec.t == expected_t++);
      const Vector flat = flatten_state(engine);
      CHECK(rec.lagrangian == doctest::Approx(lagrangian_from_snapshot(flat, s.models, s.etas)).epsilon(1e-12));
    }
    CHECK(engine.t() == 38);
  }

  TEST_CASE("projection keeps w inside the ball") {
    const auto s = random_setup(31, 3, 3, 2);
    const double R = 0.2;
    ConsensusEngine engine(initial_clients(s.models, s.etas, s.bounds), Vector::Zero(3), R,
                           DelaySchedule(DelayKind::uniform_random, s.bounds, 9));
    for (int i = 0; i < 300; ++i) {
      engine.step();
      CHECK(engine.w().norm() <= R * (1.0 + 1e-15));
    }
  }

  TEST_CASE("staleness beyond the bound halts before any state changes") {
    const auto s = random_setup(41, 2, 2, 0);
    const std::vector<int> bounds{1, 1};
    ConsensusEngine engine(initial_clients(s.models, s.etas, bounds), Vector::Zero(2), 1e6,
                           DelaySchedule(DelayKind::fixed, {3, 3}, 0, 3));
    engine.step();  // t = 1 -> 2 consumes index max(1, 2 - 3) = 1, age 1
    const Vector before = flatten_state(engine);
    // t = 2 -> 3 would consume index 1 again, age 2 > 1
    CHECK_THROWS_AS(engine.step(), StalenessViolation);
    CHECK(bit_equal(flatten_state(engine), before));
  }

  TEST_CASE("cfa aggregate examples") {
    Rng rng(2);
    const Vector w = gen::vector(rng, 3);
    const std::vector<CfaNeighbor> same{{w, 2.0}, {w, 5.0}};
    CHECK(cfa_aggregate(w, 1.0, same, 0.7, SignConvention::attract) == w);
    CHECK(cfa_aggregate(w, 1.0, same, 0.7, SignConvention::paper_literal) == w);

    const std::vector<CfaNeighbor> one{{v1(2.0), 1.0}};
    CHECK(cfa_aggregate(v1(0.0), 1.0, one, 0.5, SignConvention::attract)[0] == 0.5);
    CHECK(cfa_aggregate(v1(0.0), 1.0, one, 0.5, SignConvention::paper_literal)[0] == -0.5);

    const std::vector<CfaNeighbor> varied{{gen::vector(rng, 3), 1.0}, {gen::vector(rng, 3), 3.0}};
    CHECK(bit_equal(cfa_aggregate(w, 2.0, varied, 0.0), w));
    CHECK_THROWS_AS(cfa_aggregate(w, 1.0, std::vector<CfaNeighbor>{}, 0.5), ConfigError);
    CHECK_THROWS_AS(cfa_aggregate(w, 1.0, std::vector<CfaNeighbor>{{v1(1.0), 1.0}}, 0.5), ShapeError);
  }

  TEST_CASE("cfa local step examples") {
    Rng rng(3);
    const Vector psi = gen::vector(rng, 4);
    CHECK(cfa_local_step(psi, Vector::Zero(4), 0.3) == psi);
    Vector p(2), g(2);
    p << 1, 1;
    g << 2, 0;
    const Vector out = cfa_local_step(p, g, 0.1);
    CHECK(out[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(out[1] == 1.0);
  }

  TEST_CASE("gradient descent on one quadratic contracts to the center") {
    Matrix a = Matrix::Zero(2, 2);
    a.diagonal() << 1.0, 3.0;
    Vector c(2);
    c << 2.0, -1.0;
    const auto m = LossModel::quadratic(a, c);
    const double eta = 0.5;  // < 2 / M = 2/3
    Vector w = Vector::Zero(2);
    const std::vector<CfaNeighbor> far{{Vector::Constant(2, 100.0), 1.0}};
    for (int t = 1; t <= 200; ++t) {
      w = cfa_local_step(cfa_aggregate(w, 1.0, far, 0.0), m.gradient(w), eta);
      for (Index i = 0; i < 2; ++i) {
        const double expected = c[i] + std::pow(1.0 - eta * a(i, i), t) * (0.0 - c[i]);
        CHECK(std::abs(w[i] - expected) <= 1e-14);
      }
    }
    CHECK((w - c).norm() <= 1e-12);
  }

  TEST_CASE("cfa with mixing off is independent gradient descent") {
    Rng rng(4);
    const auto models = gen::quadratics(rng, 4, 3);
    const double lr = 0.2;
    CfaEngine engine(models, build_topology({TopologyKind::complete, 0.5, 0}, 4),
                     DelaySchedule(DelayKind::uniform_random, {2, 2, 2, 2}, 5), lr, MixingSchedule{0.0, 10.0});
    std::vector<Vector> plain(4, Vector::Zero(3));
    for (int t = 0; t < 100; ++t) {
      engine.step();
      for (std::size_t k = 0; k < 4; ++k) {
        plain[k] = plain[k] - lr * models[k].gradient(plain[k]);
        CHECK((engine.client_models()[k] - plain[k]).cwiseAbs().maxCoeff() <= 1e-15);
      }
    }
  }

  TEST_CASE("mixing rate is positive and non-increasing") {
    const MixingSchedule m{0.8, 50.0};
    double previous = m.at(1);
    for (Iteration t = 2; t < 5000; ++t) {
      const double e = m.at(t);
      CHECK(e > 0.0);
      CHECK(e <= previous);
      previous = e;
    }
    CHECK(MixingSchedule{0.8}.at(100000) == 0.8);
  }

  TEST_CASE("cfa attract reaches consensus; paper-literal does not") {
    Rng rng(6);
    const auto models = gen::quadratics(rng, 5, 2);
    auto run = [&](SignConvention sign) {
      CfaEngine engine(models, build_topology({TopologyKind::ring, 0.5, 0}, 5),
                       DelaySchedule(DelayKind::uniform_random, {1, 1, 1, 1, 1}, 2), 0.01,
                       MixingSchedule{0.5}, sign);
      CfaStepRecord rec;
      try {
        for (int i = 0; i < 300; ++i) rec = engine.step();
      } catch (const NumericalError&) {
        return std::numeric_limits<double>::infinity();
      }
      return rec.consensus_gap;
    };
    const double attract = run(SignConvention::attract);
    const double literal = run(SignConvention::paper_literal);
    CHECK(attract < literal);
  }

  TEST_CASE("cfa reuse rule raises on a breached bound") {
    Rng rng(7);
    const auto models = gen::quadratics(rng, 3, 2);
    CfaEngine engine(models, build_topology({TopologyKind::ring, 0.5, 0}, 3),
                     DelaySchedule(DelayKind::fixed, {1, 1, 1}, 0, 3), 0.1, MixingSchedule{0.5});
    engine.step();
    engine.step();
    CHECK_THROWS_AS(engine.step(), StalenessViolation);
  }
}
