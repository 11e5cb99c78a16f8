#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gcpn/ndgrad/param_vector.hpp"

namespace gcpn::ndgrad {

enum class Activation { identity, tanh, relu };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + s + "'");
}

struct HiddenLayer {
  Eigen::Index width = 64;
  Activation activation = Activation::tanh;
  bool operator==(const HiddenLayer&) const = default;
};

struct MlpSpec {
  Eigen::Index input_dim = 1;
  std::vector<HiddenLayer> hidden;
  Eigen::Index output_dim = 1;
  Activation output_activation = Activation::identity;

  bool operator==(const MlpSpec&) const = default;

  void validate() const {
    if (input_dim < 1 || output_dim < 1) throw DimensionError("MlpSpec: dims must be >= 1");
    if (hidden.empty()) throw DimensionError("MlpSpec: hidden list must be non-empty");
    for (const auto& h : hidden) {
      if (h.width < 1) throw DimensionError("MlpSpec: hidden width must be >= 1");
    }
    if (output_activation == Activation::relu) {
      throw DimensionError("MlpSpec: output activation must be identity or tanh");
    }
  }

  std::size_t n_layers() const { return hidden.size() + 1; }
  Eigen::Index in_dim(std::size_t layer) const {
    return layer == 0 ? input_dim : hidden[layer - 1].width;
  }
  Eigen::Index out_dim(std::size_t layer) const {
    return layer < hidden.size() ? hidden[layer].width : output_dim;
  }
  Activation act(std::size_t layer) const {
    return layer < hidden.size() ? hidden[layer].activation : output_activation;
  }
};

/// Two hidden layers, tanh, the default for every network in the project.
inline MlpSpec default_mlp(Eigen::Index in, Eigen::Index out, Activation output_activation,
                           Eigen::Index width = 64) {
  return {in, {{width, Activation::tanh}, {width, Activation::tanh}}, out, output_activation};
}

/// Zero parameters laid out as W0,b0,W1,b1,...
inline ParamVector make_params(const MlpSpec& spec) {
  spec.validate();
  ParamVector p;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    p.add_slice("W" + std::to_string(l), spec.out_dim(l), spec.in_dim(l));
    p.add_slice("b" + std::to_string(l), spec.out_dim(l), 1);
  }
  return p;
}

inline bool layout_matches(const MlpSpec& spec, const ParamVector& p) {
  if (p.layout().size() != 2 * spec.n_layers()) return false;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    const Slice& w = p.layout()[2 * l];
    const Slice& b = p.layout()[2 * l + 1];
    if (w.rows != spec.out_dim(l) || w.cols != spec.in_dim(l)) return false;
    if (b.rows != spec.out_dim(l) || b.cols != 1) return false;
  }
  return true;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer; the last layer uses
/// +-final_scale instead when final_scale > 0.
template <class Rng>
ParamVector init_params(const MlpSpec& spec, Rng& rng, double final_scale = 0.0) {
  ParamVector p = make_params(spec);
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    double bound = 1.0 / std::sqrt(static_cast<double>(spec.in_dim(l)));
    if (l + 1 == spec.n_layers() && final_scale > 0.0) bound = final_scale;
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t s = 2 * l; s <= 2 * l + 1; ++s) {
      auto blk = p.block(s);
      for (Eigen::Index j = 0; j < blk.cols(); ++j) {
        for (Eigen::Index i = 0; i < blk.rows(); ++i) blk(i, j) = u(rng);
      }
    }
  }
  return p;
}

namespace detail {

inline void apply_activation(Activation a, Matrix& z) {
  switch (a) {
    case Activation::identity: break;
    // 1 - 2/(e^{2z}+1) vectorizes where Eigen's double tanh does not; abs error ~1e-13.
    case Activation::tanh: z = 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0); break;
    case Activation::relu: z = z.array().max(0.0); break;
  }
}

// dZ = dA * f'(Z), written in terms of the activation output A.
inline void activation_backward(Activation a, const Matrix& out, Matrix& grad) {
  switch (a) {
    case Activation::identity: break;
    case Activation::tanh: grad.array() *= 1.0 - out.array().square(); break;
    case Activation::relu: grad.array() *= (out.array() > 0.0).cast<double>(); break;
  }
}

}  // namespace detail

/// Record of one batched forward pass. Each affine record caches its input,
/// each activation record caches its output; backward walks them in reverse.
/// The tape refers to the parameters it was recorded with, so those must
/// outlive it and stay unchanged until backward has run.
class Tape {
 public:
  enum class Op { affine, activation };
  struct Record {
    Op op;
    std::size_t layer;
    Activation activation;
    Matrix cache;
  };

  bool empty() const { return records_.empty(); }
  bool finalized() const { return finalized_; }
  const std::vector<Record>& records() const { return records_; }
  const Matrix& output() const { return output_; }
  const MlpSpec& spec() const { return *spec_; }
  const ParamVector& params() const { return *params_; }

  void clear() {
    records_.clear();
    finalized_ = false;
    spec_ = nullptr;
    params_ = nullptr;
  }

 private:
  friend Matrix forward_batch(const MlpSpec&, const ParamVector&, const Matrix&, Tape*);
  std::vector<Record> records_;
  Matrix output_;
  const MlpSpec* spec_ = nullptr;
  const ParamVector* params_ = nullptr;
  bool finalized_ = false;
};

/// Batched forward: `input` is input_dim x batch, one sample per column.
inline Matrix forward_batch(const MlpSpec& spec, const ParamVector& params, const Matrix& input,
                            Tape* tape = nullptr) {
  if (input.rows() != spec.input_dim) {
    throw DimensionError("mlp forward: input has " + std::to_string(input.rows()) +
                         " rows, spec expects " + std::to_string(spec.input_dim));
  }
  if (!layout_matches(spec, params)) {
    throw DimensionError("mlp forward: parameter layout does not match spec");
  }
  if (tape) {
    tape->clear();
    tape->spec_ = &spec;
    tape->params_ = &params;
  }
  Matrix x = input;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    auto w = params.block(2 * l);
    auto b = params.block(2 * l + 1);
    Matrix z(w.rows(), x.cols());
    z.noalias() = w * x;
    z.colwise() += b.col(0);
    if (tape) tape->records_.push_back({Tape::Op::affine, l, Activation::identity, std::move(x)});
    detail::apply_activation(spec.act(l), z);
    if (tape) tape->records_.push_back({Tape::Op::activation, l, spec.act(l), z});
    x = std::move(z);
  }
  if (tape) {
    tape->output_ = x;
    tape->finalized_ = true;
  }
  return x;
}

inline Vector forward(const MlpSpec& spec, const ParamVector& params, const Vector& input,
                      Tape* tape = nullptr) {
  Matrix in = input;
  return forward_batch(spec, params, in, tape).col(0);
}

/// Recomputes the forward pass from the tape's recorded input.
inline Matrix replay(const Tape& tape) {
  if (!tape.finalized()) throw ContractViolation("replay: tape not finalized");
  return forward_batch(tape.spec(), tape.params(), tape.records().front().cache);
}

struct Gradient {
  ParamVector params;  // same layout as the network; empty when inputs_only
  Matrix input;        // input_dim x batch
};

enum class BackwardMode { full, inputs_only };

/// Vector-Jacobian product through the recorded pass: gradients of
/// sum(seed .* output) with respect to parameters and inputs.
inline Gradient backward(const Tape& tape, const Matrix& seed,
                         BackwardMode mode = BackwardMode::full) {
  if (tape.empty() || !tape.finalized()) {
    throw ContractViolation("backward: tape is empty; run a forward pass first");
  }
  if (seed.rows() != tape.output().rows() || seed.cols() != tape.output().cols()) {
    throw DimensionError("backward: seed shape does not match recorded output");
  }
  const ParamVector& params = tape.params();
  Gradient g;
  if (mode == BackwardMode::full) g.params = params.zeros_like();
  Matrix grad = seed;
  const auto& recs = tape.records();
  for (auto it = recs.rbegin(); it != recs.rend(); ++it) {
    if (it->op == Tape::Op::activation) {
      detail::activation_backward(it->activation, it->cache, grad);
      continue;
    }
    const std::size_t l = it->layer;
    auto w = params.block(2 * l);
    if (mode == BackwardMode::full) {
      g.params.block(2 * l).noalias() = grad * it->cache.transpose();
      g.params.block(2 * l + 1) = grad.rowwise().sum();
    }
    Matrix next(w.cols(), grad.cols());
    next.noalias() = w.transpose() * grad;
    grad = std::move(next);
  }
  g.input = std::move(grad);
  return g;
}

}  // namespace gcpn::ndgrad
