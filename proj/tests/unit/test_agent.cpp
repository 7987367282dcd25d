#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "retouch/agent/agent.hpp"
#include "retouch/common/error.hpp"
#include "retouch/critic/critic.hpp"
#include "toy_data.hpp"

using namespace retouch;
using agent::AgentArch;
using agent::AgentNet;
using agent::kActions;
using agent::PolicyMatrix;

namespace {

AgentArch small_arch() {
  AgentArch a;
  a.input_size = 16;
  a.trunk_channels = {2, 3, 4, 4};
  a.kernel = 3;
  a.value_hidden = 5;
  a.policy_channels = 3;
  a.levels = 5;
  return a;
}

PolicyMatrix uniform(std::size_t levels) {
  return PolicyMatrix(levels, std::vector<double>(levels * kActions, 1.0 / static_cast<double>(levels)));
}

// Every column puts `peak` on level `at` (0-based) and spreads the rest evenly.
PolicyMatrix peaked(std::size_t levels, std::size_t at, double peak) {
  std::vector<double> q(levels * kActions, (1.0 - peak) / static_cast<double>(levels - 1));
  for (std::size_t k = 0; k < kActions; ++k) q[at * kActions + k] = peak;
  return PolicyMatrix(levels, std::move(q));
}

std::vector<image::Image> states(std::size_t n, std::size_t size, std::uint64_t seed) {
  std::vector<image::Image> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::synthetic_photo(size, size, seed + i));
  return out;
}

}  // namespace

TEST_CASE("default architecture shapes") {
  AgentArch arch;
  CHECK(arch.final_size() == 4);
  CHECK(arch.trunk_features() == 1024);
  CHECK(arch.policy_sequence() == 37);
  Rng rng(1);
  AgentNet<float> net(arch, rng);
  nn::Graph<float> g(nn::GradMode::NoGrad);
  const auto batch = states(2, 64, 1);
  const auto out = net.forward(g, critic::images_to_tensor<float>(batch));
  CHECK(out.q.shape() == nn::Shape{2, 33, 12});
  CHECK(out.log_q.shape() == nn::Shape{2, 33, 12});
  CHECK(out.value.shape() == nn::Shape{2, 1});
  CHECK_THROWS_AS(net.evaluate(testing::synthetic_photo(32, 32, 1)), InvalidArgument);
}

TEST_CASE("policy columns are distributions for any weights") {
  const auto batch = states(1, 64, 5);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    AgentNet<float> net(AgentArch{}, rng);
    const auto eval = net.evaluate(batch[0]);
    for (std::size_t k = 0; k < kActions; ++k) {
      double s = 0;
      for (std::size_t l = 0; l < 33; ++l) {
        CHECK(eval.q.at(l, k) >= 0.0);
        s += eval.q.at(l, k);
      }
      CHECK(std::abs(s - 1.0) < 1e-5);
    }
    CHECK(std::isfinite(eval.value));
  }
}

TEST_CASE("log q agrees with q") {
  Rng rng(2);
  AgentNet<double> net(small_arch(), rng);
  nn::Graph<double> g(nn::GradMode::NoGrad);
  const auto out = net.forward(g, critic::images_to_tensor<double>(states(3, 16, 2)));
  for (std::size_t i = 0; i < out.q.size(); ++i) {
    CHECK(std::log(out.q.values()[i]) == doctest::Approx(out.log_q.values()[i]).epsilon(1e-10));
  }
}

TEST_CASE("policy matrices are validated") {
  CHECK_NOTHROW(uniform(33));
  CHECK_THROWS_AS(PolicyMatrix(3, std::vector<double>(3 * kActions, 0.5)), InvalidArgument);
  CHECK_THROWS_AS(PolicyMatrix(3, std::vector<double>(2 * kActions, 0.5)), InvalidArgument);
  std::vector<double> neg(2 * kActions, 0.5);
  neg[0] = -0.1;
  neg[kActions] = 1.1;
  CHECK_THROWS_AS(PolicyMatrix(2, neg), InvalidArgument);
}

TEST_CASE("level decoding") {
  const auto& spec = filters::filter_spec(0);
  CHECK(agent::decode_action(1, spec, 33) == -1.0);
  CHECK(agent::decode_action(33, spec, 33) == 1.0);
  CHECK(agent::decode_action(17, spec, 33) == 0.0);
  CHECK(agent::decode_action(2, spec, 5) == -0.5);
  CHECK(agent::decode_action(4, spec, 5) == 0.5);
  for (std::size_t l = 1; l < 33; ++l) {
    CHECK(agent::decode_action(l + 1, spec, 33) > agent::decode_action(l, spec, 33));
  }
  CHECK_THROWS_AS(agent::decode_action(0, spec, 33), InvalidArgument);
  CHECK_THROWS_AS(agent::decode_action(34, spec, 33), InvalidArgument);
}

TEST_CASE("greedy action picks the mode and breaks ties low") {
  const auto g = agent::greedy_action(uniform(33));
  for (std::size_t k = 0; k < kActions; ++k) {
    CHECK(g.levels[k] == 1);
    CHECK(g.action.values[k] == -1.0);
  }
  const auto p = agent::greedy_action(peaked(33, 20, 0.5));
  for (std::size_t k = 0; k < kActions; ++k) CHECK(p.levels[k] == 21);
}

TEST_CASE("sampling follows the column distributions") {
  Rng rng(3);
  std::vector<double> q(5 * kActions, 0.0);
  const double column[5] = {0.1, 0.0, 0.4, 0.3, 0.2};
  for (std::size_t l = 0; l < 5; ++l)
    for (std::size_t k = 0; k < kActions; ++k) q[l * kActions + k] = column[l];
  const PolicyMatrix pm(5, q);
  std::vector<double> counts(5, 0.0);
  const int draws = 20000;
  for (int t = 0; t < draws; ++t) {
    const auto a = agent::sample_action(pm, rng);
    for (std::size_t k = 0; k < kActions; ++k) counts[a.levels[k] - 1] += 1;
    CHECK(a.action.values[0] == agent::decode_action(a.levels[0], filters::filter_spec(0), 5));
  }
  for (std::size_t l = 0; l < 5; ++l) {
    CHECK(counts[l] / (draws * kActions) == doctest::Approx(column[l]).epsilon(0.02).scale(1));
  }
  CHECK(counts[1] == 0);
}

TEST_CASE("scalar losses") {
  const auto r = agent::compute_reward(0.8, 0.002, 100.0);
  CHECK(r.value == doctest::Approx(0.6));
  CHECK(r.score == 0.8);
  CHECK(agent::value_loss(1.0, 0.4) == doctest::Approx(0.18));
  CHECK(agent::column_entropy(uniform(33), 4) == doctest::Approx(std::log(33.0)));
  CHECK(agent::column_entropy(peaked(5, 2, 1.0), 0) == 0.0);

  // Uniform q over L levels: each filter contributes ln L * adv - beta ln L.
  const std::vector<std::size_t> lv(kActions, 3);
  const double adv = 0.5, beta = 0.01;
  CHECK(agent::policy_loss(uniform(5), lv, 1.5, 1.0, beta) ==
        doctest::Approx(kActions * (std::log(5.0) * adv - beta * std::log(5.0))));
  CHECK_THROWS_AS(agent::policy_loss(uniform(5), std::vector<std::size_t>(3, 1), 1, 0, 0), InvalidArgument);
}

TEST_CASE("batched objective equals the scalar formulas") {
  Rng rng(4);
  AgentNet<double> net(small_arch(), rng);
  const auto batch = states(3, 16, 9);
  const std::vector<std::size_t> levels = [&] {
    std::vector<std::size_t> v(3 * kActions);
    for (auto& x : v) x = 1 + rng.below(5);
    return v;
  }();
  const std::vector<double> rewards = {0.3, -1.2, 2.0};
  const double beta = 0.05;
  nn::Graph<double> g(nn::GradMode::NoGrad);
  const auto out = net.forward(g, critic::images_to_tensor<double>(batch));
  const auto loss = agent::agent_loss(g, out, levels, rewards, beta);

  double vl = 0, pl = 0;
  const auto evals = net.evaluate_batch(batch);
  for (std::size_t i = 0; i < 3; ++i) {
    vl += agent::value_loss(evals[i].value, rewards[i]);
    pl += agent::policy_loss(evals[i].q, std::span(levels).subspan(i * kActions, kActions), rewards[i],
                             evals[i].value, beta);
  }
  CHECK(loss.value_loss == doctest::Approx(vl / 3).epsilon(1e-10));
  CHECK(loss.policy_loss == doctest::Approx(pl / 3).epsilon(1e-10));
  CHECK(loss.total.item() == doctest::Approx((vl + pl) / 3).epsilon(1e-10));
}

namespace {

void check_agent_gradients(std::uint64_t seed, double& fd_worst, double& match_worst, std::size_t& skipped) {
  Rng rng(seed);
  AgentNet<double> net(small_arch(), rng);
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    auto t = net.params().tensor(i);
    if (t.rank() == 1) for (auto& v : t.values()) v = rng.uniform(-0.1, 0.1);
  }
  const auto x = critic::images_to_tensor<double>(states(2, 16, 11));
  std::vector<std::size_t> levels(2 * kActions), index(2 * kActions);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    levels[i] = 1 + rng.below(5);
    index[i] = levels[i] - 1;
  }
  const std::vector<double> rewards = {0.7, -0.4};
  const double beta = 0.1;
  std::vector<nn::Tensor<double>> leaves;
  for (std::size_t i = 0; i < net.params().size(); ++i) leaves.push_back(net.params().tensor(i));

  // The advantage is a constant of the objective, so the reference surrogate
  // freezes it at the current weights before differencing.
  const auto base = net.evaluate_batch(states(2, 16, 11));
  std::vector<double> weights(2 * kActions);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < kActions; ++k) weights[i * kActions + k] = -(rewards[i] - base[i].value) / 2;
  const auto target = nn::Tensor<double>::from({2, 1}, {rewards[0], rewards[1]});
  auto surrogate = [&](nn::Graph<double>& g) {
    const auto out = net.forward(g, x);
    auto pg = g.sum(g.mul_const(g.pick(out.log_q, index), weights));
    auto ent = g.scale(g.sum(g.mul(out.q, out.log_q)), beta / 2);
    auto vl = g.scale(g.sum(g.square(g.sub(out.value, target))), 0.25);
    return g.add(g.add(pg, ent), vl);
  };
  const auto fd = testing::grad_check(leaves, surrogate, rng, 8);
  fd_worst = std::max(fd_worst, fd.max_rel_error);
  skipped += fd.skipped;

  auto grads_of = [&](auto build) {
    net.params().zero_grad();
    nn::Graph<double> g(nn::GradMode::Record);
    g.backward(build(g));
    std::vector<double> all;
    for (const auto& t : leaves) all.insert(all.end(), t.grad().begin(), t.grad().end());
    return all;
  };
  const auto expected = grads_of(surrogate);
  const auto actual = grads_of([&](nn::Graph<double>& g) {
    return agent::agent_loss(g, net.forward(g, x), levels, rewards, beta).total;
  });
  REQUIRE(actual.size() == expected.size());
  for (std::size_t i = 0; i < actual.size(); ++i) {
    match_worst = std::max(match_worst, testing::relative_error(actual[i], expected[i]));
  }
}

}  // namespace

TEST_CASE("agent objective gradients match finite differences") {
  double fd_worst = 0, match_worst = 0;
  std::size_t skipped = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    check_agent_gradients(700 + trial, fd_worst, match_worst, skipped);
  }
  MESSAGE("max relative error " << fd_worst << " over 20 instances, " << skipped << " skipped");
  CHECK(skipped <= 20);
  CHECK(fd_worst < 1e-4);
  CHECK(match_worst < 1e-10);
}

TEST_CASE("forced neutral policy decodes to the identity everywhere") {
  Rng rng(6);
  AgentNet<float> net(AgentArch{}, rng);
  net.force_neutral_policy();
  Rng noise(2);
  for (const auto& s : {testing::synthetic_photo(64, 64, 1), testing::noise_image(64, 64, noise)}) {
    const auto eval = net.evaluate(s);
    const auto g = agent::greedy_action(eval.q);
    CHECK(g.action == filters::ActionVector::neutral());
    for (std::size_t k = 0; k < kActions; ++k) {
      CHECK(g.levels[k] == 17);
      CHECK(eval.q.at(16, k) > 0.999);
    }
  }
  AgentNet<float> small(small_arch(), rng);
  small.force_neutral_policy();
  const auto g = agent::greedy_action(small.evaluate(states(1, 16, 3)[0]).q);
  CHECK(g.action == filters::ActionVector::neutral());
}

TEST_CASE("export and import restore outputs exactly") {
  Rng r1(7), r2(8);
  AgentNet<float> a(AgentArch{}, r1), b(AgentArch{}, r2);
  nn::Checkpoint ckpt;
  a.export_to(ckpt);
  b.import_from(ckpt);
  const auto s = testing::synthetic_photo(64, 64, 4);
  CHECK(a.evaluate(s).q.values()[100] == b.evaluate(s).q.values()[100]);
  CHECK(a.evaluate(s).value == b.evaluate(s).value);
  CHECK(a.params().name(0) == "agent/trunk.conv0.weight");
}
