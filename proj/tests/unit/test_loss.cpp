#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "dfl/dataset.hpp"
#include "dfl/loss.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace dfl;

namespace {

Dataset fixture_logistic3() {
  Dataset d;
  d.features.resize(3, 2);
  d.features << 1.0, 2.0, -0.5, 0.3, 0.7, -1.2;
  d.labels.resize(3);
  d.labels << 1.0, -1.0, 1.0;
  d.classification = true;
  return d;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

std::vector<LossModel> one_of_each_kind(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LossModel> out;
  out.push_back(gen::quadratic(rng, 4));
  out.push_back(LossModel::from_data(LossKind::least_squares,
                                     generate_synthetic(LossKind::least_squares, 30, 4, seed)));
  out.push_back(LossModel::from_data(LossKind::logistic, generate_synthetic(LossKind::logistic, 30, 4, seed)));
  out.push_back(LossModel::from_data(LossKind::sigmoid_nonconvex,
                                     generate_synthetic(LossKind::sigmoid_nonconvex, 30, 4, seed)));
  return out;
}

}  // namespace

TEST_SUITE("loss-models") {
  TEST_CASE("synthetic data is a pure function of the seed") {
    const auto a = generate_synthetic(LossKind::least_squares, 1, 1, 7);
    const auto b = generate_synthetic(LossKind::least_squares, 1, 1, 7);
    CHECK(a.n() == 1);
    CHECK(a.d() == 1);
    CHECK(std::memcmp(a.features.data(), b.features.data(), sizeof(double)) == 0);
    CHECK(std::memcmp(a.labels.data(), b.labels.data(), sizeof(double)) == 0);
    const auto c = generate_synthetic(LossKind::logistic, 50, 3, 8);
    CHECK(c.features != generate_synthetic(LossKind::logistic, 50, 3, 9).features);
  }

  TEST_CASE("classification labels are +-1") {
    const auto d = generate_synthetic(LossKind::logistic, 100, 5, 1);
    CHECK(d.classification);
    for (Index i = 0; i < d.n(); ++i) CHECK(std::abs(d.labels[i]) == 1.0);
    const auto s = generate_synthetic(LossKind::sigmoid_nonconvex, 100, 5, 1);
    for (Index i = 0; i < s.n(); ++i) CHECK(std::abs(s.labels[i]) == 1.0);
  }

  TEST_CASE("least-squares data recovers the hidden vector within the noise level") {
    const double noise = 0.1;
    const auto d = generate_synthetic(LossKind::least_squares, 200, 10, 3, noise);
    const Vector w = oracle::normal_equation_solve(d.features, d.labels);
    CHECK((w - d.hidden).norm() <= noise);
  }

  TEST_CASE("quadratic kind cannot be synthesized") {
    CHECK_THROWS_AS(generate_synthetic(LossKind::quadratic, 10, 2, 1), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(LossKind::logistic, 0, 2, 1), ConfigError);
  }

  TEST_CASE("iid partition of four samples gives one each") {
    const auto d = generate_synthetic(LossKind::least_squares, 4, 2, 0);
    const auto p = partition(d, 4, PartitionScheme::iid, 0);
    for (std::size_t k = 0; k < 4; ++k) CHECK(p.size_of(k) == 1);
  }

  TEST_CASE("iid partition of 100 into 3 is a 34/33/33 disjoint cover") {
    const auto d = generate_synthetic(LossKind::least_squares, 100, 2, 11);
    const auto p = partition(d, 3, PartitionScheme::iid, 5);
    std::multiset<std::size_t> sizes{p.size_of(0), p.size_of(1), p.size_of(2)};
    CHECK(sizes == std::multiset<std::size_t>{34, 33, 33});
    std::set<Index> all;
    for (const auto& rows : p.assignment) all.insert(rows.begin(), rows.end());
    CHECK(all.size() == 100);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 99);
  }

  TEST_CASE("shard-skew partition gives each client a majority class") {
    Dataset d;
    d.features = Matrix::Ones(10, 1);
    d.labels.resize(10);
    d.labels << 1, -1, 1, -1, 1, -1, 1, -1, 1, -1;
    d.classification = true;
    const auto p = partition(d, 2, PartitionScheme::shard_skew, 1);
    for (const auto& rows : p.assignment) {
      int pos = 0;
      for (Index i : rows) pos += d.labels[i] > 0;
      const int neg = static_cast<int>(rows.size()) - pos;
      CHECK(std::max(pos, neg) > static_cast<int>(rows.size()) / 2);
    }
  }

  TEST_CASE("partition rejects more clients than samples") {
    const auto d = generate_synthetic(LossKind::least_squares, 3, 2, 0);
    CHECK_THROWS_AS(partition(d, 4, PartitionScheme::iid, 0), ConfigError);
  }

  TEST_CASE("partition is always a disjoint cover") {
    Rng rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
      const Index n = gen::integer(rng, 1, 80);
      const auto k = static_cast<std::size_t>(gen::integer(rng, 1, static_cast<int>(n)));
      const auto scheme = rng.below(2) ? PartitionScheme::iid : PartitionScheme::shard_skew;
      const auto d = generate_synthetic(LossKind::logistic, n, 2, rng.next());
      const auto p = partition(d, k, scheme, rng.next());
      std::vector<int> hits(static_cast<std::size_t>(n), 0);
      for (const auto& rows : p.assignment) {
        CHECK(!rows.empty());
        for (Index i : rows) ++hits[static_cast<std::size_t>(i)];
      }
      for (int h : hits) CHECK(h == 1);
    }
  }

  TEST_CASE("quadratic values and gradients by hand") {
    const auto zero = LossModel::quadratic(Matrix::Identity(2, 2), Vector::Zero(2));
    CHECK(zero.value(Vector::Zero(2)) == 0.0);
    const auto q = LossModel::quadratic(Matrix::Identity(2, 2), vec({1, 1}));
    CHECK(q.value(vec({0, 0})) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(q.gradient(vec({0, 0})) == vec({-1, -1}));
  }

  TEST_CASE("logistic loss at the origin is ln 2") {
    const auto m = LossModel::from_data(LossKind::logistic, fixture_logistic3());
    CHECK(m.value(Vector::Zero(2)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }

  TEST_CASE("logistic gradient vanishes at an independently computed minimizer") {
    const auto d = generate_synthetic(LossKind::logistic, 200, 3, 42);
    const Vector w = oracle::logistic_newton(d.features, d.labels);
    const auto m = LossModel::from_data(LossKind::logistic, d);
    CHECK(m.gradient(w).norm() <= 1e-8);
  }

  TEST_CASE("gradients match central finite differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng rng(seed * 97);
      for (const auto& m : one_of_each_kind(seed)) {
        for (int i = 0; i < 20; ++i) {
          const Vector w = gen::vector(rng, m.dimension(), 1.5);
          const Vector fd = oracle::central_difference([&](const Vector& x) { return m.value(x); }, w);
          const Vector g = m.gradient(w);
          CHECK((g - fd).norm() <= 1e-6 * std::max(1.0, g.norm()));
        }
      }
    }
  }

  TEST_CASE("Lipschitz constants in closed form") {
    CHECK(LossModel::quadratic(Matrix::Identity(3, 3), Vector::Zero(3)).lipschitz_constant() ==
          doctest::Approx(1.0).epsilon(1e-12));
    Matrix a = Matrix::Zero(2, 2);
    a.diagonal() << 2.0, 5.0;
    CHECK(LossModel::quadratic(a, Vector::Zero(2)).lipschitz_constant() == doctest::Approx(5.0).epsilon(1e-12));
  }

  TEST_CASE("least-squares Lipschitz constant matches a dense eigensolver") {
    Rng rng(50);
    Dataset d;
    d.features.resize(50, 4);
    for (Index i = 0; i < 50; ++i)
      for (Index j = 0; j < 4; ++j) d.features(i, j) = rng.normal();
    d.labels = gen::vector(rng, 50);
    const auto m = LossModel::from_data(LossKind::least_squares, d);
    const double expected = oracle::max_eigenvalue_dense(d.features.transpose() * d.features) / 50.0;
    CHECK(std::abs(m.lipschitz_constant() - expected) <= 1e-8 * expected);
    const auto logistic = LossModel::from_data(LossKind::logistic, generate_synthetic(LossKind::logistic, 60, 4, 3));
    const auto& x = logistic.data().features;
    CHECK(logistic.lipschitz_constant() ==
          doctest::Approx(oracle::max_eigenvalue_dense(x.transpose() * x) / (4.0 * 60.0)).epsilon(1e-10));
  }

  TEST_CASE("analytic Lipschitz constants bound sampled gradient ratios") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      Rng rng(seed + 1000);
      for (const auto& m : one_of_each_kind(seed)) {
        for (int i = 0; i < 100; ++i) {
          const Vector x = gen::vector(rng, m.dimension(), gen::real(rng, 0.1, 4.0));
          const Vector y = x + gen::vector(rng, m.dimension(), std::pow(10.0, gen::real(rng, -3, 1)));
          const double lhs = (m.gradient(x) - m.gradient(y)).norm();
          CHECK(lhs <= m.lipschitz_constant() * (x - y).norm() * (1.0 + 1e-9));
        }
      }
    }
  }

  TEST_CASE("sigmoid curvature bound is 1/(6 sqrt 3)") {
    CHECK(kSigmoidCurvatureBound == doctest::Approx(1.0 / (6.0 * std::sqrt(3.0))).epsilon(1e-15));
    // |sigma''| peaks at ln(2 + sqrt 3)
    const double z = std::log(2.0 + std::sqrt(3.0));
    const double s = 1.0 / (1.0 + std::exp(-z));
    CHECK(std::abs(s * (1 - s) * (1 - 2 * s)) == doctest::Approx(kSigmoidCurvatureBound).epsilon(1e-12));
  }

  TEST_CASE("weighted global objective") {
    Rng rng(3);
    const auto single = gen::quadratic(rng, 3);
    const std::vector<LossModel> one{single};
    const Vector w = gen::vector(rng, 3);
    CHECK(weighted_global_objective(one, w) == doctest::Approx(single.value(w)).epsilon(1e-15));

    const std::vector<LossModel> twins{single.with_weight(0.5), single.with_weight(0.5)};
    CHECK(weighted_global_objective(twins, w) == doctest::Approx(single.value(w)).epsilon(1e-14));

    // A_k = I: the minimizer is the weighted mean of the centers.
    const double wts[] = {0.2, 0.3, 0.5};
    std::vector<LossModel> three;
    Vector mean = Vector::Zero(2);
    for (double wt : wts) {
      const Vector c = gen::vector(rng, 2, 3.0);
      three.push_back(LossModel::quadratic(Matrix::Identity(2, 2), c, wt));
      mean += wt * c;
    }
    CHECK(weighted_global_gradient(three, mean).norm() <= 1e-14);
    const double at_mean = weighted_global_objective(three, mean);
    for (int i = 0; i < 50; ++i) {
      CHECK(weighted_global_objective(three, mean + gen::vector(rng, 2, 0.1)) >= at_mean);
    }
  }

  TEST_CASE("weights must sum to one") {
    Rng rng(4);
    const std::vector<LossModel> bad{gen::quadratic(rng, 2, 0.5), gen::quadratic(rng, 2, 0.4)};
    CHECK_THROWS_AS(weighted_global_objective(bad, Vector::Zero(2)), ConfigError);
  }

  TEST_CASE("dimension mismatches and bad matrices are rejected") {
    const auto q = LossModel::quadratic(Matrix::Identity(2, 2), Vector::Zero(2));
    CHECK_THROWS_AS(q.value(Vector::Zero(3)), ShapeError);
    CHECK_THROWS_AS(q.gradient(Vector::Zero(1)), ShapeError);
    Matrix asym(2, 2);
    asym << 1, 2, 0, 1;
    CHECK_THROWS(LossModel::quadratic(asym, Vector::Zero(2)));
    Matrix indefinite(2, 2);
    indefinite << 1, 0, 0, -1;
    CHECK_THROWS(LossModel::quadratic(indefinite, Vector::Zero(2)));
  }

  TEST_CASE("dataset files round-trip exactly") {
    const auto d = generate_synthetic(LossKind::logistic, 7, 3, 5);
    const auto path = std::filesystem::temp_directory_path() / "dfl_dataset_roundtrip.txt";
    save_dataset(d, path);
    const auto back = load_dataset(path);
    CHECK(back.features == d.features);
    CHECK(back.labels == d.labels);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_dataset(path), IoError);
  }
}
