#include <doctest.h>

#include "helpers.hpp"
#include "l2l/objectives.hpp"
#include "oracles.hpp"

using namespace l2l;

TEST_CASE("bce reference points") {
  const std::vector<std::uint8_t> one{1};
  const std::vector<double> w1{1.0};
  CHECK(bce_loss(Tensor::from({1}, {1 - 1e-12}), one, w1).item() == doctest::Approx(0.0).epsilon(1e-11));
  CHECK(bce_loss(Tensor::from({1}, {0.5}), one, w1).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const WeightScheme scheme = WeightScheme::exponential({0.5, 0.5});
  const std::vector<std::uint8_t> y{1, 0};
  const auto w = scheme.weights(y, 2);
  CHECK(w[0] == doctest::Approx(std::exp(0.5)).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(std::exp(0.5)).epsilon(1e-15));
  const double loss = bce_loss(Tensor::from({2}, {0.9, 0.2}), y, w).item();
  CHECK(loss == doctest::Approx(std::exp(0.5) * (-std::log(0.9) - std::log(0.8))).epsilon(1e-14));
  CHECK(loss == doctest::Approx(0.5417).epsilon(1e-4));
}

TEST_CASE("bce is non-negative and zero only at the labels") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const std::vector<std::uint8_t> y{static_cast<std::uint8_t>(rng.bernoulli(0.5))};
    const std::vector<double> w{rng.uniform(0.5, 3)};
    CHECK(bce_loss(Tensor::from({1}, {rng.uniform(0.01, 0.99)}), y, w).item() > 0.0);
  }
  const std::vector<std::uint8_t> y{1, 0};
  const std::vector<double> w{1, 1};
  CHECK(bce_loss(Tensor::from({2}, {1.0, 0.0}), y, w).item() < 1e-11);
}

TEST_CASE("saturated probabilities without the clamp") {
  const std::vector<std::uint8_t> y{0};
  const std::vector<double> w{1};
  CHECK_THROWS_AS(bce_loss(Tensor::from({1}, {1.0}), y, w, false), Error);
  CHECK(std::isfinite(bce_loss(Tensor::from({1}, {1.0}), y, w, true).item()));
}

TEST_CASE("gradient with respect to a logit is w·(p − y)") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Tensor z = Tensor::from({3}, {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)}, true);
    const std::vector<std::uint8_t> y{1, 0, static_cast<std::uint8_t>(t % 2)};
    const std::vector<double> w{rng.uniform(0.5, 3), rng.uniform(0.5, 3), 1.0};
    const Tensor p = sigmoid(z);
    backward(bce_loss(p, y, w));
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(z.grad()[i] - w[i] * (p.at(i) - y[i])) < 1e-10);
  }
}

TEST_CASE("attribute weights") {
  CHECK(attribute_weight(0.5, 1) == doctest::Approx(1.6487).epsilon(1e-4));
  CHECK(attribute_weight(0.5, 0) == attribute_weight(0.5, 1));
  CHECK(attribute_weight(0.0, 1) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  CHECK(attribute_weight(0.9, 1) == doctest::Approx(1.1052).epsilon(1e-4));
  CHECK(attribute_weight(0.9, 0) == doctest::Approx(2.4596).epsilon(1e-4));
  CHECK_THROWS_AS(attribute_weight(1.5, 0), Error);
  CHECK_THROWS_AS(attribute_weight(-0.1, 1), Error);
  CHECK_THROWS_AS(WeightScheme::exponential({0.2, 1.2}), Error);
  const auto uw = WeightScheme::uniform().weights(std::vector<std::uint8_t>{1, 0, 1}, 3);
  CHECK(uw == std::vector<double>{1, 1, 1});
  CHECK(parse_weight_kind("exponential") == WeightKind::Exponential);
  CHECK_THROWS_AS(parse_weight_kind("focal"), Error);
}

TEST_CASE("total loss combines the two terms linearly") {
  Rng rng(3);
  const std::size_t m = 4, batch = 3;
  std::vector<std::uint8_t> y(batch * m);
  for (auto& v : y) v = static_cast<std::uint8_t>(rng.bernoulli(0.4));
  const Tensor l = l2l::test::random_tensor({batch * m}, rng, true, 0.05, 0.95);
  Tensor p = l2l::test::random_tensor({batch * m}, rng, true, 0.05, 0.95);
  const WeightScheme scheme = WeightScheme::exponential({0.1, 0.4, 0.5, 0.9});

  const LossTerms two = total_loss(l, p, y, 2.0, scheme, m);
  const auto w = scheme.weights(y, m);
  const double aqn = bce_loss(l, y, w).item() / batch;
  const double mlm = bce_loss(p, y, w).item() / batch;
  CHECK(two.aqn.item() == doctest::Approx(aqn).epsilon(1e-14));
  CHECK(two.mlm.item() == doctest::Approx(mlm).epsilon(1e-14));
  CHECK(two.total.item() == doctest::Approx(aqn + 2 * mlm).epsilon(1e-14));

  p.zero_grad();
  backward(total_loss(l, p, y, 0.0, scheme, m).total);
  if (p.has_grad())
    for (double g : p.grad()) CHECK(g == 0.0);
  CHECK(l.has_grad());
}

TEST_CASE("library loss matches the direct formula on random triples") {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const int y = rng.bernoulli(0.5) ? 1 : 0;
    const double p = rng.uniform(1e-6, 1 - 1e-6);
    const double gamma = rng.uniform();
    const double w = oracle::weight(gamma, y);
    CHECK(std::abs(attribute_weight(gamma, static_cast<std::uint8_t>(y)) - w) < 1e-12);
    const std::vector<std::uint8_t> yy{static_cast<std::uint8_t>(y)};
    const std::vector<double> ww{w};
    CHECK(std::abs(bce_loss(Tensor::from({1}, {p}), yy, ww).item() - oracle::bce({p}, {y}, {w})) < 1e-12);
  }
}
