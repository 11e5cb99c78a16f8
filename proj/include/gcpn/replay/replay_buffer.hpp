#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "gcpn/error.hpp"

namespace gcpn::replay {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One joint step: per-agent observations, actions, rewards, next observations.
struct Transition {
  std::vector<Vector> obs;
  std::vector<Vector> actions;
  std::vector<double> rewards;
  std::vector<Vector> next_obs;
  bool terminal = false;

  bool operator==(const Transition& o) const {
    return obs == o.obs && actions == o.actions && rewards == o.rewards &&
           next_obs == o.next_obs && terminal == o.terminal;
  }
};

/// Column-per-sample view of a minibatch, ready for batched network passes.
struct Batch {
  std::vector<Matrix> obs;       // per agent: obs_dim x B
  std::vector<Matrix> actions;   // per agent: act_dim x B
  Matrix rewards;                // N x B
  std::vector<Matrix> next_obs;  // per agent: obs_dim x B
  Eigen::RowVectorXd terminal;   // 1 x B, 1.0 where terminal

  Eigen::Index size() const { return rewards.cols(); }
  std::size_t n_agents() const { return obs.size(); }
};

struct Spaces {
  std::vector<Eigen::Index> obs_dims;
  std::vector<Eigen::Index> action_dims;
  bool operator==(const Spaces&) const = default;
};

/// FIFO ring of joint transitions stored as flat rows. Sampling copies data
/// out, so later pushes never alter a batch already handed out.
class ReplayBuffer {
 public:
  ReplayBuffer(Spaces spaces, std::size_t capacity) : spaces_(std::move(spaces)), capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("ReplayBuffer: capacity must be positive");
    if (spaces_.obs_dims.size() != spaces_.action_dims.size() || spaces_.obs_dims.empty()) {
      throw ConfigError("ReplayBuffer: need matching non-empty obs/action dim lists");
    }
    std::size_t off = 0;
    for (auto d : spaces_.obs_dims) {
      obs_off_.push_back(off);
      off += static_cast<std::size_t>(d);
    }
    for (auto d : spaces_.action_dims) {
      act_off_.push_back(off);
      off += static_cast<std::size_t>(d);
    }
    rew_off_ = off;
    off += n_agents();
    for (auto d : spaces_.obs_dims) {
      next_off_.push_back(off);
      off += static_cast<std::size_t>(d);
    }
    term_off_ = off;
    row_ = off + 1;
  }

  std::size_t n_agents() const { return spaces_.obs_dims.size(); }
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  const Spaces& spaces() const { return spaces_; }

  void push(const Transition& t) {
    validate(t);
    const std::size_t slot = cursor_;
    if (size_ < capacity_ && slot * row_ >= data_.size()) data_.resize((slot + 1) * row_);
    double* r = data_.data() + slot * row_;
    for (std::size_t i = 0; i < n_agents(); ++i) {
      std::copy(t.obs[i].data(), t.obs[i].data() + t.obs[i].size(), r + obs_off_[i]);
      std::copy(t.actions[i].data(), t.actions[i].data() + t.actions[i].size(), r + act_off_[i]);
      std::copy(t.next_obs[i].data(), t.next_obs[i].data() + t.next_obs[i].size(),
                r + next_off_[i]);
      r[rew_off_ + i] = t.rewards[i];
    }
    r[term_off_] = t.terminal ? 1.0 : 0.0;
    cursor_ = (cursor_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
  }

  /// Uniform with replacement over stored items.
  template <class Rng>
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
    if (size_ < batch || size_ == 0) {
      throw UnderfullError("replay buffer holds " + std::to_string(size_) + " transitions, batch " +
                           std::to_string(batch) + " requested");
    }
    std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
    std::vector<std::size_t> idx(batch);
    for (auto& k : idx) k = pick(rng);
    return idx;
  }

  template <class Rng>
  std::vector<Transition> sample(std::size_t batch, Rng& rng) const {
    std::vector<Transition> out;
    for (std::size_t k : sample_indices(batch, rng)) out.push_back(at(k));
    return out;
  }

  template <class Rng>
  Batch sample_batch(std::size_t batch, Rng& rng) const {
    return gather(sample_indices(batch, rng));
  }

  /// Storage-order access: index 0 is the oldest surviving transition.
  Transition at(std::size_t k) const {
    if (k >= size_) throw std::out_of_range("ReplayBuffer::at");
    const double* r = row_ptr(k);
    Transition t;
    for (std::size_t i = 0; i < n_agents(); ++i) {
      t.obs.emplace_back(Eigen::Map<const Vector>(r + obs_off_[i], spaces_.obs_dims[i]));
      t.actions.emplace_back(Eigen::Map<const Vector>(r + act_off_[i], spaces_.action_dims[i]));
      t.next_obs.emplace_back(Eigen::Map<const Vector>(r + next_off_[i], spaces_.obs_dims[i]));
      t.rewards.push_back(r[rew_off_ + i]);
    }
    t.terminal = r[term_off_] != 0.0;
    return t;
  }

  Batch gather(const std::vector<std::size_t>& idx) const {
    const auto b = static_cast<Eigen::Index>(idx.size());
    Batch out;
    out.rewards.resize(static_cast<Eigen::Index>(n_agents()), b);
    out.terminal.resize(b);
    for (std::size_t i = 0; i < n_agents(); ++i) {
      out.obs.emplace_back(spaces_.obs_dims[i], b);
      out.actions.emplace_back(spaces_.action_dims[i], b);
      out.next_obs.emplace_back(spaces_.obs_dims[i], b);
    }
    for (Eigen::Index c = 0; c < b; ++c) {
      const double* r = row_ptr(idx[static_cast<std::size_t>(c)]);
      for (std::size_t i = 0; i < n_agents(); ++i) {
        out.obs[i].col(c) = Eigen::Map<const Vector>(r + obs_off_[i], spaces_.obs_dims[i]);
        out.actions[i].col(c) = Eigen::Map<const Vector>(r + act_off_[i], spaces_.action_dims[i]);
        out.next_obs[i].col(c) = Eigen::Map<const Vector>(r + next_off_[i], spaces_.obs_dims[i]);
        out.rewards(static_cast<Eigen::Index>(i), c) = r[rew_off_ + i];
      }
      out.terminal(c) = r[term_off_];
    }
    return out;
  }

  // Snapshot format: "gcpn-replay 1", capacity, cursor, size, N, per-agent
  // obs/action dims, then size rows of hexfloats in storage order.
  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "gcpn-replay 1\n" << capacity_ << ' ' << size_ << ' ' << n_agents() << "\n";
    for (std::size_t i = 0; i < n_agents(); ++i) {
      os << spaces_.obs_dims[i] << ' ' << spaces_.action_dims[i] << "\n";
    }
    os << std::hexfloat;
    for (std::size_t k = 0; k < size_; ++k) {
      const double* r = row_ptr(k);
      for (std::size_t c = 0; c < row_; ++c) os << r[c] << (c + 1 == row_ ? '\n' : ' ');
    }
  }

  static ReplayBuffer load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::string tag;
    int version = 0;
    std::size_t capacity = 0, size = 0, n = 0;
    if (!(is >> tag >> version >> capacity >> size >> n) || tag != "gcpn-replay" || version != 1) {
      throw ParseError(path, "bad replay snapshot header");
    }
    Spaces sp;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Index o = 0, a = 0;
      if (!(is >> o >> a)) throw ParseError(path, "bad space entry");
      sp.obs_dims.push_back(o);
      sp.action_dims.push_back(a);
    }
    ReplayBuffer buf(sp, capacity);
    buf.data_.resize(size * buf.row_);
    std::string token;
    for (std::size_t k = 0; k < size * buf.row_; ++k) {
      if (!(is >> token)) throw ParseError(path, "truncated snapshot");
      buf.data_[k] = std::strtod(token.c_str(), nullptr);
    }
    buf.size_ = size;
    buf.cursor_ = size % capacity;
    return buf;
  }

 private:
  const double* row_ptr(std::size_t k) const {
    // Oldest element sits at cursor_ once the ring has wrapped.
    const std::size_t slot = size_ < capacity_ ? k : (cursor_ + k) % capacity_;
    return data_.data() + slot * row_;
  }

  void validate(const Transition& t) const {
    const std::size_t n = n_agents();
    if (t.obs.size() != n || t.actions.size() != n || t.rewards.size() != n ||
        t.next_obs.size() != n) {
      throw DimensionError("transition agent count does not match buffer (" + std::to_string(n) +
                           ")");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (t.obs[i].size() != spaces_.obs_dims[i] || t.next_obs[i].size() != spaces_.obs_dims[i]) {
        throw DimensionError("observation dim mismatch for agent " + std::to_string(i));
      }
      if (t.actions[i].size() != spaces_.action_dims[i]) {
        throw DimensionError("action dim mismatch for agent " + std::to_string(i));
      }
    }
  }

  Spaces spaces_;
  std::size_t capacity_;
  std::vector<double> data_;
  std::vector<std::size_t> obs_off_, act_off_, next_off_;
  std::size_t rew_off_ = 0, term_off_ = 0, row_ = 0;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
};

}  // namespace gcpn::replay
