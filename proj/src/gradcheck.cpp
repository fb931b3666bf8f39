#include "adnet/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <memory>

#include "adnet/labels.hpp"
#include "adnet/network.hpp"
#include "adnet/rng.hpp"
#include "adnet/tape.hpp"
#include "adnet/tensor.hpp"

namespace adnet {
namespace {

template <typename Real>
struct FdProblem {
  std::vector<std::shared_ptr<TensorT<Real>>> storage;
  std::vector<TensorT<Real>*> params;
  // Rebuilds the computation from current parameter values; must be a pure
  // function of them (dropout streams are re-seeded identically per call).
  std::function<Real(bool compute_grads)> run;

  TensorT<Real>* add(TensorT<Real> t) {
    storage.push_back(std::make_shared<TensorT<Real>>(std::move(t)));
    params.push_back(storage.back().get());
    return storage.back().get();
  }
};

template <typename Real>
TensorT<Real> random_tensor(std::vector<std::size_t> shape, RngStream& rng, double lo = -1.0,
                            double hi = 1.0) {
  auto t = TensorT<Real>::zeros(std::move(shape));
  for (auto& v : t.values) v = static_cast<Real>(rng.uniform(lo, hi));
  return t;
}

template <typename Real>
std::vector<Real> random_coeffs(std::size_t n, RngStream& rng) {
  std::vector<Real> c(n);
  for (auto& v : c) v = static_cast<Real>(rng.uniform(-1.0, 1.0));
  return c;
}

template <typename Real>
double worst_rel_err(FdProblem<Real>& prob, double h, std::size_t element_budget,
                     RngStream& rng) {
  for (auto* p : prob.params) {
    p->ensure_grad();
    p->zero_grad();
  }
  prob.run(true);

  std::vector<std::pair<std::size_t, std::size_t>> picks;  // (param idx, element)
  std::size_t total = 0;
  for (auto* p : prob.params) total += p->numel();
  if (total <= element_budget) {
    for (std::size_t pi = 0; pi < prob.params.size(); ++pi)
      for (std::size_t e = 0; e < prob.params[pi]->numel(); ++e) picks.emplace_back(pi, e);
  } else {
    for (std::size_t i = 0; i < element_budget; ++i) {
      std::size_t flat = static_cast<std::size_t>(rng.below(total));
      std::size_t pi = 0;
      while (flat >= prob.params[pi]->numel()) flat -= prob.params[pi++]->numel();
      picks.emplace_back(pi, flat);
    }
  }

  double worst = 0.0;
  for (auto [pi, e] : picks) {
    TensorT<Real>& t = *prob.params[pi];
    const Real saved = t.values[e];
    t.values[e] = saved + static_cast<Real>(h);
    const double lp = static_cast<double>(prob.run(false));
    t.values[e] = saved - static_cast<Real>(h);
    const double lm = static_cast<double>(prob.run(false));
    t.values[e] = saved;
    const double fd = (lp - lm) / (2.0 * h);
    const double analytic = static_cast<double>(t.grad[e]);
    const double rel =
        std::abs(analytic - fd) / std::max(1e-4, std::abs(analytic) + std::abs(fd));
    worst = std::max(worst, rel);
  }
  return worst;
}

template <typename Real>
using ProblemMaker = std::function<FdProblem<Real>(RngStream&)>;

template <typename Real>
FdProblem<Real> make_conv_problem(RngStream& r) {
  FdProblem<Real> prob;
  const std::size_t n = 1 + r.below(2), c = 1 + r.below(3);
  const std::size_t h = 3 + r.below(4), w = 3 + r.below(4);
  const std::size_t co = 1 + r.below(4);
  auto* x = prob.add(random_tensor<Real>({n, c, h, w}, r));
  auto* k = prob.add(random_tensor<Real>({co, c, 3, 3}, r));
  auto* b = prob.add(random_tensor<Real>({co}, r, -0.5, 0.5));
  auto coeffs = random_coeffs<Real>(n * co * h * w, r);
  prob.run = [=](bool grads) {
    TapeT<Real> tape;
    auto out = tape.conv2d(tape.leaf(x), tape.leaf(k), tape.leaf(b));
    auto loss = tape.inner(out, coeffs);
    if (grads) tape.backward(loss);
    return tape.value(loss).values[0];
  };
  return prob;
}

template <typename Real>
FdProblem<Real> make_pool_problem(RngStream& r) {
  FdProblem<Real> prob;
  const std::size_t n = 1 + r.below(2), c = 1 + r.below(3);
  const std::size_t h = 2 + r.below(5), w = 2 + r.below(5);
  auto* x = prob.add(random_tensor<Real>({n, c, h, w}, r));
  auto coeffs = random_coeffs<Real>(n * c * (h / 2) * (w / 2), r);
  prob.run = [=](bool grads) {
    TapeT<Real> tape;
    auto loss = tape.inner(tape.maxpool2(tape.leaf(x)), coeffs);
    if (grads) tape.backward(loss);
    return tape.value(loss).values[0];
  };
  return prob;
}

template <typename Real>
FdProblem<Real> make_leaky_problem(RngStream& r) {
  FdProblem<Real> prob;
  const std::size_t n = 1 + r.below(3), d = 1 + r.below(12);
  auto* x = prob.add(random_tensor<Real>({n, d}, r));
  auto coeffs = random_coeffs<Real>(n * d, r);
  prob.run = [=](bool grads) {
    TapeT<Real> tape;
    auto loss = tape.inner(tape.leaky_relu(tape.leaf(x), Real(0.1)), coeffs);
    if (grads) tape.backward(loss);
    return tape.value(loss).values[0];
  };
  return prob;
}

template <typename Real>
FdProblem<Real> make_fc_problem(RngStream& r) {
  FdProblem<Real> prob;
  const std::size_t n = 1 + r.below(3), din = 1 + r.below(8), dout = 1 + r.below(8);
  auto* x = prob.add(random_tensor<Real>({n, din}, r));
  auto* w = prob.add(random_tensor<Real>({din, dout}, r));
  auto* b = prob.add(random_tensor<Real>({dout}, r, -0.5, 0.5));
  auto coeffs = random_coeffs<Real>(n * dout, r);
  prob.run = [=](bool grads) {
    TapeT<Real> tape;
    auto loss =
        tape.inner(tape.fully_connected(tape.leaf(x), tape.leaf(w), tape.leaf(b)), coeffs);
    if (grads) tape.backward(loss);
    return tape.value(loss).values[0];
  };
  return prob;
}

template <typename Real>
FdProblem<Real> make_dropout_problem(RngStream& r) {
  FdProblem<Real> prob;
  const std::size_t n = 2, d = 16;
  auto* x = prob.add(random_tensor<Real>({n, d}, r));
  auto coeffs = random_coeffs<Real>(n * d, r);
  const std::uint64_t mask_seed = r.next_u64();
  prob.run = [=](bool grads) {
    TapeT<Real> tape;
    RngStream mask_rng(mask_seed);  // identical mask for every evaluation
    auto loss =
        tape.inner(tape.dropout(tape.leaf(x), Real(0.5), true, mask_rng), coeffs);
    if (grads) tape.backward(loss);
    return tape.value(loss).values[0];
  };
  return prob;
}

template <typename Real>
FdProblem<Real> make_softmax_ce_problem(RngStream& r) {
  FdProblem<Real> prob;
  const std::size_t n = 1 + r.below(4), k = 2 + r.below(7);
  auto* z = prob.add(random_tensor<Real>({n, k}, r, -2.0, 2.0));
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = static_cast<std::size_t>(r.below(k));
  prob.run = [=](bool grads) {
    TapeT<Real> tape;
    auto loss = tape.softmax_cross_entropy(tape.leaf(z), labels);
    if (grads) tape.backward(loss);
    return tape.value(loss).values[0];
  };
  return prob;
}

template <typename Real>
FdProblem<Real> make_sigmoid_bce_problem(RngStream& r) {
  FdProblem<Real> prob;
  const std::size_t n = 1 + r.below(4), b = 1 + r.below(8);
  auto* z = prob.add(random_tensor<Real>({n, b}, r, -2.0, 2.0));
  auto targets = TensorT<Real>::zeros({n, b});
  for (auto& t : targets.values) t = static_cast<Real>(r.below(2));
  prob.run = [=](bool grads) {
    TapeT<Real> tape;
    auto loss = tape.sigmoid_binary_cross_entropy(tape.leaf(z), targets);
    if (grads) tape.backward(loss);
    return tape.value(loss).values[0];
  };
  return prob;
}

template <typename Real>
FdProblem<Real> make_channel_mix_problem(RngStream& r) {
  FdProblem<Real> prob;
  const std::size_t n = 1 + r.below(2), c = 1 + r.below(4);
  const std::size_t h = 2 + r.below(3), w = 2 + r.below(3);
  auto* a = prob.add(random_tensor<Real>({n, c, h, w}, r));
  auto* b = prob.add(random_tensor<Real>({n, c, h, w}, r));
  auto* alpha = prob.add(random_tensor<Real>({c}, r, 0.0, 1.0));
  auto coeffs = random_coeffs<Real>(n * c * h * w, r);
  prob.run = [=](bool grads) {
    TapeT<Real> tape;
    auto loss = tape.inner(
        tape.channel_mix(tape.leaf(a), tape.leaf(b), tape.leaf(alpha)), coeffs);
    if (grads) tape.backward(loss);
    return tape.value(loss).values[0];
  };
  return prob;
}

template <typename Real>
FdProblem<Real> make_add_problem(RngStream& r) {
  FdProblem<Real> prob;
  const std::size_t n = 1 + r.below(3), d = 1 + r.below(10);
  auto* a = prob.add(random_tensor<Real>({n, d}, r));
  auto* b = prob.add(random_tensor<Real>({n, d}, r));
  auto coeffs = random_coeffs<Real>(n * d, r);
  prob.run = [=](bool grads) {
    TapeT<Real> tape;
    auto loss = tape.inner(tape.add(tape.leaf(a), tape.leaf(b)), coeffs);
    if (grads) tape.backward(loss);
    return tape.value(loss).values[0];
  };
  return prob;
}

template <typename Real>
FdProblem<Real> make_blend_problem(RngStream& r) {
  FdProblem<Real> prob;
  auto* a = prob.add(random_tensor<Real>({1}, r));
  auto* b = prob.add(random_tensor<Real>({1}, r));
  const Real wa = static_cast<Real>(r.uniform(-1.0, 1.0));
  const Real wb = static_cast<Real>(r.uniform(-1.0, 1.0));
  prob.run = [=](bool grads) {
    TapeT<Real> tape;
    auto loss = tape.blend(tape.leaf(a), tape.leaf(b), wa, wb);
    if (grads) tape.backward(loss);
    return tape.value(loss).values[0];
  };
  return prob;
}

template <typename Real>
FdProblem<Real> make_end_to_end_problem(AdaptiveMode mode, RngStream& r) {
  NetworkConfig cfg;
  cfg.input_height = 32;
  cfg.input_width = 32;
  cfg.channels = { 4, 4, 4, 4 };
  cfg.fc_widths = { 8, 8 };
  cfg.writer_classes = 5;
  cfg.aux = AuxHeadSpec{AuxTaskKind::kWordRecognition, 7};
  cfg.mode = mode;
  cfg.dropout_rate = 0.5;

  auto net = std::make_shared<Network<Real>>(cfg);
  net->init_params(RngStream(r.next_u64()));

  FdProblem<Real> prob;
  for (auto* p : net->parameters()) prob.params.push_back(p);

  const std::size_t batch = 2;
  auto images = std::make_shared<TensorT<Real>>(
      random_tensor<Real>({batch, 1, cfg.input_height, cfg.input_width}, r, 0.0, 1.0));
  std::vector<std::size_t> writer_labels(batch), word_labels(batch);
  for (auto& l : writer_labels) l = static_cast<std::size_t>(r.below(cfg.writer_classes));
  for (auto& l : word_labels) l = static_cast<std::size_t>(r.below(cfg.aux.vocab_size));
  const std::uint64_t dropout_seed = r.next_u64();
  const Real lambda = Real(0.7);

  prob.run = [=](bool grads) {
    TapeT<Real> tape;
    RngStream dropout_rng(dropout_seed);
    auto out = net->forward(tape, *images, true, &dropout_rng);
    auto wl = tape.softmax_cross_entropy(out.writer_logits, writer_labels);
    auto al = tape.softmax_cross_entropy(out.aux_logits, word_labels);
    auto loss = joint_loss(tape, wl, al, lambda);
    if (grads) tape.backward(loss);
    return tape.value(loss).values[0];
  };
  return prob;
}

}  // namespace

template <typename Real>
GradCheckReport run_gradient_checks(double tolerance, std::size_t shapes_per_op,
                                    std::uint64_t seed) {
  const double h = sizeof(Real) == 8 ? 1e-6 : 1e-2;
  const RngStream base(seed);
  GradCheckReport report;
  report.tolerance = tolerance;

  auto check = [&](const std::string& name, ProblemMaker<Real> make,
                   std::size_t repeats, std::size_t budget) {
    double worst = 0.0;
    for (std::size_t i = 0; i < repeats; ++i) {
      RngStream r = base.split(name).split(i);
      FdProblem<Real> prob = make(r);
      RngStream pick = base.split(name + ".pick").split(i);
      worst = std::max(worst, worst_rel_err(prob, h, budget, pick));
    }
    report.ops.push_back(GradCheckOpResult{name, worst, worst < tolerance});
  };

  check("conv2d", make_conv_problem<Real>, shapes_per_op, 256);
  check("maxpool2", make_pool_problem<Real>, shapes_per_op, 256);
  check("leaky_relu", make_leaky_problem<Real>, shapes_per_op, 256);
  check("fully_connected", make_fc_problem<Real>, shapes_per_op, 256);
  check("dropout", make_dropout_problem<Real>, shapes_per_op, 256);
  check("softmax_cross_entropy", make_softmax_ce_problem<Real>, shapes_per_op, 256);
  check("sigmoid_bce", make_sigmoid_bce_problem<Real>, shapes_per_op, 256);
  check("channel_mix", make_channel_mix_problem<Real>, shapes_per_op, 256);
  check("add", make_add_problem<Real>, shapes_per_op, 256);
  check("blend", make_blend_problem<Real>, shapes_per_op, 16);

  for (AdaptiveMode mode :
       {AdaptiveMode::kBaseline, AdaptiveMode::kLinear, AdaptiveMode::kDeep}) {
    const std::string name = std::string("end_to_end_") + to_string(mode);
    check(
        name,
        [mode](RngStream& r) { return make_end_to_end_problem<Real>(mode, r); },
        1, 50);
  }
  return report;
}

template GradCheckReport run_gradient_checks<double>(double, std::size_t, std::uint64_t);
template GradCheckReport run_gradient_checks<float>(double, std::size_t, std::uint64_t);

}  // namespace adnet
