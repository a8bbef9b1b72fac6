#pragma once

#include "amtl/data.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>

namespace amtl {

/// Affine layer y = W x + b with a freeze flag.
template <typename Scalar, int In, int Out>
struct DenseLayer {
  static constexpr int kInputs = In;
  static constexpr int kOutputs = Out;
  static constexpr int kParams = In * Out + Out;

  Eigen::Matrix<Scalar, Out, In> weight = Eigen::Matrix<Scalar, Out, In>::Zero();
  Eigen::Matrix<Scalar, Out, 1> bias = Eigen::Matrix<Scalar, Out, 1>::Zero();
  bool frozen = false;

  bool all_finite() const { return weight.allFinite() && bias.allFinite(); }
  bool same_values(const DenseLayer& o) const { return weight == o.weight && bias == o.bias; }
};

/// Input layer and first two hidden layers: 4 -> 8 -> 16, ReLU after each.
/// This is the part that fine-tuning freezes and multi-task training shares.
template <typename Scalar>
struct Trunk {
  DenseLayer<Scalar, kNumInputs, 8> l1;
  DenseLayer<Scalar, 8, 16> l2;
  static constexpr int kParams = decltype(l1)::kParams + decltype(l2)::kParams;

  bool same_values(const Trunk& o) const { return l1.same_values(o.l1) && l2.same_values(o.l2); }
};

/// Task-specific part: 16 -> 8 (ReLU) -> 1 (identity).
template <typename Scalar>
struct Head {
  DenseLayer<Scalar, 16, 8> l3;
  DenseLayer<Scalar, 8, 1> l4;
  static constexpr int kParams = decltype(l3)::kParams + decltype(l4)::kParams;

  bool same_values(const Head& o) const { return l3.same_values(o.l3) && l4.same_values(o.l4); }
};

/// The 4-8-16-8-1 regression network.
template <typename Scalar>
struct FeedForward {
  Trunk<Scalar> trunk;
  Head<Scalar> head;
  static constexpr int kParams = Trunk<Scalar>::kParams + Head<Scalar>::kParams;

  std::array<bool, 4> freeze_flags() const {
    return {trunk.l1.frozen, trunk.l2.frozen, head.l3.frozen, head.l4.frozen};
  }
  void set_freeze_flags(const std::array<bool, 4>& f) {
    trunk.l1.frozen = f[0];
    trunk.l2.frozen = f[1];
    head.l3.frozen = f[2];
    head.l4.frozen = f[3];
  }
  bool all_finite() const {
    return trunk.l1.all_finite() && trunk.l2.all_finite() && head.l3.all_finite() && head.l4.all_finite();
  }
};

/// Hard parameter sharing: one trunk, a source head (index 0) and a target
/// head (index 1).
template <typename Scalar>
struct MultiTask {
  static constexpr int kSource = 0;
  static constexpr int kTarget = 1;

  Trunk<Scalar> shared;
  std::array<Head<Scalar>, 2> heads;
  static constexpr int kParams = Trunk<Scalar>::kParams + 2 * Head<Scalar>::kParams;

  /// Both heads start as copies of the network's head; the trunk is copied
  /// as well, so every layer begins from the network's initialization.
  static MultiTask from_network(const FeedForward<Scalar>& net) {
    MultiTask m;
    m.shared = net.trunk;
    m.heads = {net.head, net.head};
    m.shared.l1.frozen = m.shared.l2.frozen = false;
    for (auto& h : m.heads) h.l3.frozen = h.l4.frozen = false;
    return m;
  }

  FeedForward<Scalar> branch(int task) const { return {shared, heads[static_cast<std::size_t>(task)]}; }
};

using NetModel = FeedForward<double>;
using MtlModel = MultiTask<double>;

// ---- Batched kernels ---------------------------------------------------------
//
// Batches are column-major: one sample per column.

template <typename Scalar>
using Batch = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct TrunkActivations {
  Eigen::Matrix<Scalar, 8, Eigen::Dynamic> z1, a1;
  Eigen::Matrix<Scalar, 16, Eigen::Dynamic> z2, a2;
};

template <typename Scalar>
struct HeadActivations {
  Eigen::Matrix<Scalar, 8, Eigen::Dynamic> z3, a3;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> out;
};

template <typename Scalar>
void forward_trunk(const Trunk<Scalar>& t, const Eigen::Matrix<Scalar, kNumInputs, Eigen::Dynamic>& x,
                   TrunkActivations<Scalar>& act) {
  act.z1.noalias() = t.l1.weight * x;
  act.z1.colwise() += t.l1.bias;
  act.a1 = act.z1.cwiseMax(Scalar(0));
  act.z2.noalias() = t.l2.weight * act.a1;
  act.z2.colwise() += t.l2.bias;
  act.a2 = act.z2.cwiseMax(Scalar(0));
}

template <typename Scalar>
void forward_head(const Head<Scalar>& h, const Eigen::Matrix<Scalar, 16, Eigen::Dynamic>& features,
                  HeadActivations<Scalar>& act) {
  act.z3.noalias() = h.l3.weight * features;
  act.z3.colwise() += h.l3.bias;
  act.a3 = act.z3.cwiseMax(Scalar(0));
  act.out.noalias() = h.l4.weight * act.a3;
  act.out.array() += h.l4.bias(0);
}

/// Gradient of the head parameters given dL/dout; returns dL/d(features)
/// when `features_grad` is non-null.
template <typename Scalar>
void backward_head(const Head<Scalar>& h, const Eigen::Matrix<Scalar, 16, Eigen::Dynamic>& features,
                   const HeadActivations<Scalar>& act, const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>& dout,
                   Head<Scalar>& grad, Eigen::Matrix<Scalar, 16, Eigen::Dynamic>* features_grad) {
  grad.l4.weight.noalias() = dout * act.a3.transpose();
  grad.l4.bias(0) = dout.sum();
  Eigen::Matrix<Scalar, 8, Eigen::Dynamic> dz3 =
      (h.l4.weight.transpose() * dout).cwiseProduct((act.z3.array() > Scalar(0)).template cast<Scalar>().matrix());
  grad.l3.weight.noalias() = dz3 * features.transpose();
  grad.l3.bias = dz3.rowwise().sum();
  if (features_grad) features_grad->noalias() = h.l3.weight.transpose() * dz3;
}

template <typename Scalar>
void backward_trunk(const Trunk<Scalar>& t, const Eigen::Matrix<Scalar, kNumInputs, Eigen::Dynamic>& x,
                    const TrunkActivations<Scalar>& act, const Eigen::Matrix<Scalar, 16, Eigen::Dynamic>& da2,
                    Trunk<Scalar>& grad) {
  Eigen::Matrix<Scalar, 16, Eigen::Dynamic> dz2 =
      da2.cwiseProduct((act.z2.array() > Scalar(0)).template cast<Scalar>().matrix());
  grad.l2.weight.noalias() = dz2 * act.a1.transpose();
  grad.l2.bias = dz2.rowwise().sum();
  Eigen::Matrix<Scalar, 8, Eigen::Dynamic> dz1 =
      (t.l2.weight.transpose() * dz2).cwiseProduct((act.z1.array() > Scalar(0)).template cast<Scalar>().matrix());
  grad.l1.weight.noalias() = dz1 * x.transpose();
  grad.l1.bias = dz1.rowwise().sum();
}

// ---- Flat parameter views ------------------------------------------------------
//
// Layout: l1, l2, l3, l4 (then the second head for MultiTask); within a
// layer the weight in column-major order followed by the bias.

namespace detail {

template <typename Scalar, int In, int Out>
void pack(const DenseLayer<Scalar, In, Out>& l, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v, Eigen::Index& at) {
  v.segment(at, In * Out) = Eigen::Map<const Eigen::Matrix<Scalar, In * Out, 1>>(l.weight.data());
  at += In * Out;
  v.segment(at, Out) = l.bias;
  at += Out;
}

template <typename Scalar, int In, int Out>
void unpack(DenseLayer<Scalar, In, Out>& l, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v, Eigen::Index& at) {
  Eigen::Map<Eigen::Matrix<Scalar, In * Out, 1>>(l.weight.data()) = v.segment(at, In * Out);
  at += In * Out;
  l.bias = v.segment(at, Out);
  at += Out;
}

}  // namespace detail

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> parameters(const FeedForward<Scalar>& net) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(FeedForward<Scalar>::kParams);
  Eigen::Index at = 0;
  detail::pack(net.trunk.l1, v, at);
  detail::pack(net.trunk.l2, v, at);
  detail::pack(net.head.l3, v, at);
  detail::pack(net.head.l4, v, at);
  return v;
}

template <typename Scalar>
FeedForward<Scalar> with_parameters(FeedForward<Scalar> net, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) {
  Eigen::Index at = 0;
  detail::unpack(net.trunk.l1, v, at);
  detail::unpack(net.trunk.l2, v, at);
  detail::unpack(net.head.l3, v, at);
  detail::unpack(net.head.l4, v, at);
  return net;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> parameters(const MultiTask<Scalar>& m) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(MultiTask<Scalar>::kParams);
  Eigen::Index at = 0;
  detail::pack(m.shared.l1, v, at);
  detail::pack(m.shared.l2, v, at);
  for (const auto& h : m.heads) {
    detail::pack(h.l3, v, at);
    detail::pack(h.l4, v, at);
  }
  return v;
}

template <typename Scalar>
MultiTask<Scalar> with_parameters(MultiTask<Scalar> m, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) {
  Eigen::Index at = 0;
  detail::unpack(m.shared.l1, v, at);
  detail::unpack(m.shared.l2, v, at);
  for (auto& h : m.heads) {
    detail::unpack(h.l3, v, at);
    detail::unpack(h.l4, v, at);
  }
  return m;
}

// ---- Training ------------------------------------------------------------------

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int iterations = 1000;
  AdamParams adam;
  /// Initialization seed for builders that start from a fresh network.
  std::uint64_t seed = 0;

  /// Throws ConfigError unless learning_rate > 0 and iterations >= 1.
  void validate() const;
};

/// Adam with bias correction on one tensor, in place.
template <typename DerivedP, typename DerivedG, typename DerivedM, typename DerivedV>
void adam_step(Eigen::MatrixBase<DerivedP>& param, const Eigen::MatrixBase<DerivedG>& grad,
               Eigen::MatrixBase<DerivedM>& m, Eigen::MatrixBase<DerivedV>& v, const AdamParams& a,
               double learning_rate, int step) {
  using Scalar = typename DerivedP::Scalar;
  const Scalar b1 = Scalar(a.beta1);
  const Scalar b2 = Scalar(a.beta2);
  m = b1 * m + (Scalar(1) - b1) * grad;
  v = b2 * v + (Scalar(1) - b2) * grad.cwiseAbs2();
  const Scalar c1 = Scalar(1) - Scalar(std::pow(a.beta1, step));
  const Scalar c2 = Scalar(1) - Scalar(std::pow(a.beta2, step));
  param.array() -= Scalar(learning_rate) * (m.array() / c1) / ((v.array() / c2).sqrt() + Scalar(a.epsilon));
}

struct TrainResult {
  NetModel net;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct MtlTrainResult {
  MtlModel model;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct NetGradient {
  double loss = 0.0;
  NetModel grad;  // same shape as the network; freeze flags are meaningless here
};

struct MtlGradient {
  double loss = 0.0;  // l^s + l^t
  MtlModel grad;
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero. Deterministic per seed.
NetModel init_net(std::uint64_t seed);

/// Throws InputError for a non-finite input.
double forward(const NetModel& net, const InputVector& x);
Eigen::VectorXd forward(const NetModel& net, const InputMatrix& x);

/// MSE loss and its gradient with respect to every parameter.
NetGradient loss_gradient(const NetModel& net, const Dataset& data);
double loss(const NetModel& net, const Dataset& data);

/// Full-batch Adam on the MSE loss for exactly cfg.iterations steps; frozen
/// layers are not touched. Throws DivergenceError on a non-finite loss.
TrainResult train(const NetModel& net, const Dataset& data, const TrainConfig& cfg);

/// Copies the source network, freezes the trunk and trains the head on the
/// target data.
TrainResult fine_tune(const NetModel& source_net, const Dataset& target_train, const TrainConfig& cfg);

MtlGradient mtl_loss_gradient(const MtlModel& model, const Dataset& source, const Dataset& target);
double mtl_loss(const MtlModel& model, const Dataset& source, const Dataset& target);

/// Adam on L = l^s + l^t, each loss a full-batch MSE through its own head.
MtlTrainResult train_mtl(const MtlModel& model, const Dataset& source, const Dataset& target,
                         const TrainConfig& cfg);

/// Prediction through the target head.
double predict_target(const MtlModel& model, const InputVector& x);
Eigen::VectorXd predict_target(const MtlModel& model, const InputMatrix& x);

}  // namespace amtl
