#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "gcpn/replay/replay_buffer.hpp"

using namespace gcpn;
using namespace gcpn::replay;

namespace {

Spaces two_agent_spaces() { return {{3, 2}, {2, 1}}; }

// Every field encodes `tag` so stored items can be identified after sampling.
Transition tagged(double tag) {
  Transition t;
  t.obs = {Vector::Constant(3, tag), Vector::Constant(2, tag + 0.1)};
  t.actions = {Vector::Constant(2, -tag), Vector::Constant(1, -tag - 0.1)};
  t.rewards = {tag, 2 * tag};
  t.next_obs = {Vector::Constant(3, tag + 0.5), Vector::Constant(2, tag + 0.6)};
  t.terminal = static_cast<int>(tag) % 2 == 0;
  return t;
}

}  // namespace

TEST(ReplayPush, FirstPushGivesSizeOne) {
  ReplayBuffer buf(two_agent_spaces(), 10);
  buf.push(tagged(1));
  EXPECT_EQ(buf.size(), 1u);
  EXPECT_EQ(buf.at(0), tagged(1));
}

TEST(ReplayPush, RingOverwritesOldestFirst) {
  ReplayBuffer buf(two_agent_spaces(), 2);
  buf.push(tagged(1));
  buf.push(tagged(2));
  buf.push(tagged(3));
  ASSERT_EQ(buf.size(), 2u);
  EXPECT_EQ(buf.at(0), tagged(2));
  EXPECT_EQ(buf.at(1), tagged(3));
}

TEST(ReplayPush, SizeSaturatesAtCapacity) {
  ReplayBuffer buf({{1}, {1}}, 10000);
  Transition t;
  t.obs = {Vector::Zero(1)};
  t.actions = {Vector::Zero(1)};
  t.rewards = {0.0};
  t.next_obs = {Vector::Zero(1)};
  for (int k = 0; k < 100000; ++k) {
    t.rewards[0] = k;
    buf.push(t);
  }
  EXPECT_EQ(buf.size(), 10000u);
  EXPECT_EQ(buf.at(0).rewards[0], 90000.0);
  EXPECT_EQ(buf.at(9999).rewards[0], 99999.0);
}

TEST(ReplayPush, RejectsDimensionMismatch) {
  ReplayBuffer buf(two_agent_spaces(), 4);
  Transition t = tagged(1);
  t.actions[1] = Vector::Zero(3);
  EXPECT_THROW(buf.push(t), DimensionError);
  t = tagged(1);
  t.rewards.pop_back();
  EXPECT_THROW(buf.push(t), DimensionError);
  EXPECT_EQ(buf.size(), 0u);
}

TEST(ReplaySample, UnderfullIsExplicitError) {
  ReplayBuffer buf(two_agent_spaces(), 4);
  buf.push(tagged(1));
  std::mt19937_64 rng(0);
  EXPECT_THROW(buf.sample(3, rng), UnderfullError);
}

TEST(ReplaySample, SingleElementBufferReturnsIt) {
  ReplayBuffer buf(two_agent_spaces(), 4);
  buf.push(tagged(5));
  std::mt19937_64 rng(0);
  const auto s = buf.sample(1, rng);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], tagged(5));
}

TEST(ReplaySample, EmpiricalFrequenciesWithinFiveSigmaOfUniform) {
  ReplayBuffer buf({{1}, {1}}, 1000);
  Transition t;
  t.obs = {Vector::Zero(1)};
  t.actions = {Vector::Zero(1)};
  t.rewards = {0.0};
  t.next_obs = {Vector::Zero(1)};
  for (int k = 0; k < 1000; ++k) {
    t.rewards[0] = k;
    buf.push(t);
  }
  std::mt19937_64 rng(123);
  std::vector<int> counts(1000, 0);
  const int draws = 100000;
  for (int d = 0; d < draws; ++d) {
    counts[static_cast<std::size_t>(buf.sample(1, rng)[0].rewards[0])]++;
  }
  const double p = 1.0 / 1000.0;
  const double mean = draws * p;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (int c : counts) EXPECT_LE(std::abs(c - mean), 5 * sigma);
}

TEST(ReplaySample, DeterministicForSameSeedAndHistory) {
  auto build = [] {
    ReplayBuffer buf(two_agent_spaces(), 50);
    for (int k = 0; k < 80; ++k) buf.push(tagged(k));
    return buf;
  };
  const ReplayBuffer a = build(), b = build();
  std::mt19937_64 ra(77), rb(77);
  for (int round = 0; round < 10; ++round) {
    EXPECT_EQ(a.sample(16, ra), b.sample(16, rb));
  }
}

TEST(ReplaySample, SamplesAreNotMutatedByLaterPushes) {
  ReplayBuffer buf(two_agent_spaces(), 3);
  for (int k = 0; k < 3; ++k) buf.push(tagged(k));
  std::mt19937_64 rng(4);
  const auto drawn = buf.sample(3, rng);
  const auto batch = buf.gather({0, 1, 2});
  const auto drawn_copy = drawn;
  const Matrix obs0 = batch.obs[0];
  for (int k = 10; k < 20; ++k) buf.push(tagged(k));
  EXPECT_EQ(drawn, drawn_copy);
  EXPECT_EQ(batch.obs[0], obs0);
}

TEST(ReplayBatch, GatherMatchesPerTransitionView) {
  ReplayBuffer buf(two_agent_spaces(), 8);
  for (int k = 0; k < 8; ++k) buf.push(tagged(k));
  const std::vector<std::size_t> idx = {3, 0, 7, 3};
  const Batch b = buf.gather(idx);
  ASSERT_EQ(b.size(), 4);
  for (Eigen::Index c = 0; c < 4; ++c) {
    const Transition t = buf.at(idx[static_cast<std::size_t>(c)]);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_EQ(Vector(b.obs[i].col(c)), t.obs[i]);
      EXPECT_EQ(Vector(b.actions[i].col(c)), t.actions[i]);
      EXPECT_EQ(Vector(b.next_obs[i].col(c)), t.next_obs[i]);
      EXPECT_EQ(b.rewards(static_cast<Eigen::Index>(i), c), t.rewards[i]);
    }
    EXPECT_EQ(b.terminal(c) != 0.0, t.terminal);
  }
}

TEST(ReplaySnapshot, RoundTripPreservesContentsAndRingOrder) {
  ReplayBuffer buf(two_agent_spaces(), 5);
  for (int k = 0; k < 7; ++k) buf.push(tagged(k + 0.125));
  const auto path = std::filesystem::temp_directory_path() / "gcpn_replay_snapshot.txt";
  buf.save(path.string());
  ReplayBuffer back = ReplayBuffer::load(path.string());
  ASSERT_EQ(back.size(), buf.size());
  for (std::size_t k = 0; k < buf.size(); ++k) EXPECT_EQ(back.at(k), buf.at(k));
  buf.push(tagged(100));
  back.push(tagged(100));
  for (std::size_t k = 0; k < buf.size(); ++k) EXPECT_EQ(back.at(k), buf.at(k));
  std::filesystem::remove(path);
}
