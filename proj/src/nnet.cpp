#include "amtl/nnet.hpp"

#include "amtl/errors.hpp"
#include "amtl/random.hpp"

#include <string>

namespace amtl {

namespace {

using Inputs = Eigen::Matrix<double, kNumInputs, Eigen::Dynamic>;
using Row = Eigen::Matrix<double, 1, Eigen::Dynamic>;

template <int In, int Out>
void init_layer(DenseLayer<double, In, Out>& layer, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(In));
  for (Index c = 0; c < In; ++c) {
    for (Index r = 0; r < Out; ++r) layer.weight(r, c) = rng.uniform(-bound, bound);
  }
  layer.bias.setZero();
}

Inputs columns(const Dataset& data) { return data.inputs().transpose(); }

void require_data(const Dataset& data, const char* what) {
  if (data.empty()) throw EmptyDatasetError(std::string(what) + ": empty dataset");
}

template <int In, int Out>
void adam_layer(DenseLayer<double, In, Out>& p, const DenseLayer<double, In, Out>& g,
                DenseLayer<double, In, Out>& m, DenseLayer<double, In, Out>& v, const TrainConfig& cfg,
                int step) {
  if (p.frozen) return;
  adam_step(p.weight, g.weight, m.weight, v.weight, cfg.adam, cfg.learning_rate, step);
  adam_step(p.bias, g.bias, m.bias, v.bias, cfg.adam, cfg.learning_rate, step);
}

void adam_trunk(Trunk<double>& p, const Trunk<double>& g, Trunk<double>& m, Trunk<double>& v,
                const TrainConfig& cfg, int step) {
  adam_layer(p.l1, g.l1, m.l1, v.l1, cfg, step);
  adam_layer(p.l2, g.l2, m.l2, v.l2, cfg, step);
}

void adam_head(Head<double>& p, const Head<double>& g, Head<double>& m, Head<double>& v,
               const TrainConfig& cfg, int step) {
  adam_layer(p.l3, g.l3, m.l3, v.l3, cfg, step);
  adam_layer(p.l4, g.l4, m.l4, v.l4, cfg, step);
}

// One network over one dataset; buffers are reused across iterations.
class NetPass {
 public:
  explicit NetPass(const Dataset& data) : x_(columns(data)), y_(data.outputs().transpose()) {}

  double loss(const NetModel& net) {
    forward_trunk(net.trunk, x_, trunk_);
    forward_head(net.head, trunk_.a2, head_);
    return (head_.out - y_).squaredNorm() / static_cast<double>(y_.size());
  }

  /// Loss and gradient. Layers below the lowest trainable layer are skipped
  /// unless `full` is set.
  double gradient(const NetModel& net, NetModel& grad, bool full) {
    const double l = loss(net);
    dout_ = (2.0 / static_cast<double>(y_.size())) * (head_.out - y_);
    const bool need_trunk = full || !net.trunk.l1.frozen || !net.trunk.l2.frozen;
    backward_head(net.head, trunk_.a2, head_, dout_, grad.head, need_trunk ? &da2_ : nullptr);
    if (need_trunk) backward_trunk(net.trunk, x_, trunk_, da2_, grad.trunk);
    return l;
  }

  /// Head-only gradient into `head_grad`, accumulating dL/d(trunk) into
  /// `trunk_grad`.
  double gradient_through(const Trunk<double>& trunk, const Head<double>& head, Head<double>& head_grad,
                          Trunk<double>& trunk_grad) {
    forward_trunk(trunk, x_, trunk_);
    forward_head(head, trunk_.a2, head_);
    const double l = (head_.out - y_).squaredNorm() / static_cast<double>(y_.size());
    dout_ = (2.0 / static_cast<double>(y_.size())) * (head_.out - y_);
    backward_head(head, trunk_.a2, head_, dout_, head_grad, &da2_);
    backward_trunk(trunk, x_, trunk_, da2_, trunk_grad);
    return l;
  }

  double loss_through(const Trunk<double>& trunk, const Head<double>& head) {
    forward_trunk(trunk, x_, trunk_);
    forward_head(head, trunk_.a2, head_);
    return (head_.out - y_).squaredNorm() / static_cast<double>(y_.size());
  }

 private:
  Inputs x_;
  Row y_;
  TrunkActivations<double> trunk_;
  HeadActivations<double> head_;
  Row dout_;
  Eigen::Matrix<double, 16, Eigen::Dynamic> da2_;
};

template <int In, int Out>
void add_into(DenseLayer<double, In, Out>& acc, const DenseLayer<double, In, Out>& g) {
  acc.weight += g.weight;
  acc.bias += g.bias;
}

void check_finite_loss(double l, int iteration, const char* what) {
  if (!std::isfinite(l)) {
    throw DivergenceError(std::string(what) + ": non-finite loss at iteration " + std::to_string(iteration));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train: learning_rate must be positive");
  }
  if (iterations < 1) throw ConfigError("train: iterations must be >= 1");
}

NetModel init_net(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "nnet/init"));
  NetModel net;
  init_layer(net.trunk.l1, rng);
  init_layer(net.trunk.l2, rng);
  init_layer(net.head.l3, rng);
  init_layer(net.head.l4, rng);
  return net;
}

double forward(const NetModel& net, const InputVector& x) {
  if (!x.allFinite()) throw InputError("nnet: non-finite input");
  const Eigen::Matrix<double, 8, 1> a1 = (net.trunk.l1.weight * x + net.trunk.l1.bias).cwiseMax(0.0);
  const Eigen::Matrix<double, 16, 1> a2 = (net.trunk.l2.weight * a1 + net.trunk.l2.bias).cwiseMax(0.0);
  const Eigen::Matrix<double, 8, 1> a3 = (net.head.l3.weight * a2 + net.head.l3.bias).cwiseMax(0.0);
  return (net.head.l4.weight * a3)(0) + net.head.l4.bias(0);
}

Eigen::VectorXd forward(const NetModel& net, const InputMatrix& x) {
  if (!x.allFinite()) throw InputError("nnet: non-finite input");
  const Inputs cols = x.transpose();
  TrunkActivations<double> t;
  HeadActivations<double> h;
  forward_trunk(net.trunk, cols, t);
  forward_head(net.head, t.a2, h);
  return h.out.transpose();
}

NetGradient loss_gradient(const NetModel& net, const Dataset& data) {
  require_data(data, "nnet");
  NetPass pass(data);
  NetGradient g;
  g.loss = pass.gradient(net, g.grad, true);
  return g;
}

double loss(const NetModel& net, const Dataset& data) {
  require_data(data, "nnet");
  NetPass pass(data);
  return pass.loss(net);
}

TrainResult train(const NetModel& net, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  require_data(data, "train");
  if (!net.all_finite()) throw InputError("train: non-finite parameters");
  NetPass pass(data);
  TrainResult result{net, 0.0, 0.0};
  NetModel& p = result.net;
  NetModel grad;
  NetModel m;
  NetModel v;
  for (int step = 1; step <= cfg.iterations; ++step) {
    const double l = pass.gradient(p, grad, false);
    check_finite_loss(l, step, "train");
    if (step == 1) result.initial_loss = l;
    adam_trunk(p.trunk, grad.trunk, m.trunk, v.trunk, cfg, step);
    adam_head(p.head, grad.head, m.head, v.head, cfg, step);
  }
  result.final_loss = pass.loss(p);
  check_finite_loss(result.final_loss, cfg.iterations, "train");
  if (!p.all_finite()) throw DivergenceError("train: non-finite parameters");
  return result;
}

TrainResult fine_tune(const NetModel& source_net, const Dataset& target_train, const TrainConfig& cfg) {
  NetModel net = source_net;
  net.set_freeze_flags({true, true, false, false});
  return train(net, target_train, cfg);
}

MtlGradient mtl_loss_gradient(const MtlModel& model, const Dataset& source, const Dataset& target) {
  require_data(source, "mtl");
  require_data(target, "mtl");
  NetPass ps(source);
  NetPass pt(target);
  MtlGradient g;
  Trunk<double> trunk_t;
  g.loss = ps.gradient_through(model.shared, model.heads[MtlModel::kSource],
                               g.grad.heads[MtlModel::kSource], g.grad.shared);
  g.loss += pt.gradient_through(model.shared, model.heads[MtlModel::kTarget],
                                g.grad.heads[MtlModel::kTarget], trunk_t);
  add_into(g.grad.shared.l1, trunk_t.l1);
  add_into(g.grad.shared.l2, trunk_t.l2);
  return g;
}

double mtl_loss(const MtlModel& model, const Dataset& source, const Dataset& target) {
  require_data(source, "mtl");
  require_data(target, "mtl");
  NetPass ps(source);
  NetPass pt(target);
  return ps.loss_through(model.shared, model.heads[MtlModel::kSource]) +
         pt.loss_through(model.shared, model.heads[MtlModel::kTarget]);
}

MtlTrainResult train_mtl(const MtlModel& model, const Dataset& source, const Dataset& target,
                         const TrainConfig& cfg) {
  cfg.validate();
  require_data(source, "train_mtl");
  require_data(target, "train_mtl");
  NetPass ps(source);
  NetPass pt(target);
  MtlTrainResult result{model, 0.0, 0.0};
  MtlModel& p = result.model;
  MtlModel grad;
  MtlModel m;
  MtlModel v;
  Trunk<double> trunk_t;
  for (int step = 1; step <= cfg.iterations; ++step) {
    double l = ps.gradient_through(p.shared, p.heads[MtlModel::kSource], grad.heads[MtlModel::kSource], grad.shared);
    l += pt.gradient_through(p.shared, p.heads[MtlModel::kTarget], grad.heads[MtlModel::kTarget], trunk_t);
    check_finite_loss(l, step, "train_mtl");
    if (step == 1) result.initial_loss = l;
    add_into(grad.shared.l1, trunk_t.l1);
    add_into(grad.shared.l2, trunk_t.l2);
    adam_trunk(p.shared, grad.shared, m.shared, v.shared, cfg, step);
    for (std::size_t h = 0; h < 2; ++h) adam_head(p.heads[h], grad.heads[h], m.heads[h], v.heads[h], cfg, step);
  }
  result.final_loss = ps.loss_through(p.shared, p.heads[MtlModel::kSource]) +
                      pt.loss_through(p.shared, p.heads[MtlModel::kTarget]);
  check_finite_loss(result.final_loss, cfg.iterations, "train_mtl");
  return result;
}

double predict_target(const MtlModel& model, const InputVector& x) {
  return forward(model.branch(MtlModel::kTarget), x);
}

Eigen::VectorXd predict_target(const MtlModel& model, const InputMatrix& x) {
  return forward(model.branch(MtlModel::kTarget), x);
}

}  // namespace amtl
