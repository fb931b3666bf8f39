#include "adnet/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "adnet/errors.hpp"
#include "adnet/kernels.hpp"

namespace adnet {

template <typename Real>
auto TapeT<Real>::push_value(TensorT<Real> t) -> Id {
  Slot s;
  s.owned = std::move(t);
  slots_.push_back(std::move(s));
  grads_.emplace_back();
  return static_cast<Id>(slots_.size() - 1);
}

template <typename Real>
auto TapeT<Real>::leaf(TensorT<Real>* param) -> Id {
  Slot s;
  s.external = param;
  slots_.push_back(std::move(s));
  grads_.emplace_back();
  Id id = static_cast<Id>(slots_.size() - 1);
  leaves_.emplace_back(id, param);
  return id;
}

template <typename Real>
auto TapeT<Real>::input(TensorT<Real> value) -> Id {
  return push_value(std::move(value));
}

template <typename Real>
const TensorT<Real>& TapeT<Real>::val(Id id) const {
  const Slot& s = slots_[id];
  return s.external ? *s.external : s.owned;
}

template <typename Real>
const TensorT<Real>& TapeT<Real>::value(Id id) const {
  return val(id);
}

template <typename Real>
std::span<const Real> TapeT<Real>::grad(Id id) const {
  return grads_[id];
}

template <typename Real>
std::vector<Real>& TapeT<Real>::grad_buf(Id id) {
  auto& g = grads_[id];
  if (g.size() != val(id).numel()) g.assign(val(id).numel(), Real(0));
  return g;
}

template <typename Real>
auto TapeT<Real>::conv2d(Id x, Id kernels, Id bias) -> Id {
  const auto& in = val(x);
  const auto& k = val(kernels);
  const auto& b = val(bias);
  if (in.rank() != 4) throw DimensionError("conv2d: input must be [N,C,H,W], got " + shape_str(in.shape));
  if (k.rank() != 4 || k.dim(2) != 3 || k.dim(3) != 3)
    throw DimensionError("conv2d: kernels must be [Cout,Cin,3,3], got " + shape_str(k.shape));
  if (k.dim(1) != in.dim(1))
    throw DimensionError("conv2d: input channels " + std::to_string(in.dim(1)) +
                         " != kernel channels " + std::to_string(k.dim(1)));
  if (b.numel() != k.dim(0))
    throw DimensionError("conv2d: bias length " + std::to_string(b.numel()) +
                         " != output channels " + std::to_string(k.dim(0)));
  const std::size_t n = in.dim(0), cin = in.dim(1), h = in.dim(2), w = in.dim(3);
  const std::size_t cout = k.dim(0);

  auto pad = std::make_shared<std::vector<Real>>(n * cin * (h + 2) * (w + 2));
  kernels::pad3x3(in.values.data(), n, cin, h, w, pad->data());
  TensorT<Real> out = TensorT<Real>::zeros({n, cout, h, w});
  kernels::conv3x3_forward(pad->data(), n, cin, h, w, k.values.data(), b.values.data(),
                           cout, out.values.data());
  Id y = push_value(std::move(out));

  nodes_.push_back(Node{{x, kernels, bias},
                        y,
                        [=](TapeT& t) {
                          const auto& g = t.grads_[y];
                          const auto& kt = t.val(kernels);
                          auto& gx = t.grad_buf(x);
                          auto& gk = t.grad_buf(kernels);
                          auto& gb = t.grad_buf(bias);
                          kernels::conv3x3_backward(pad->data(), n, cin, h, w,
                                                    kt.values.data(), cout, g.data(),
                                                    gx.data(), gk.data(), gb.data());
                        }});
  return y;
}

template <typename Real>
auto TapeT<Real>::maxpool2(Id x) -> Id {
  const auto& in = val(x);
  if (in.rank() != 4) throw DimensionError("maxpool2: input must be [N,C,H,W]");
  const std::size_t n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
  if (h < 2 || w < 2)
    throw DimensionError("maxpool2: spatial size " + std::to_string(h) + "x" +
                         std::to_string(w) + " is below the 2x2 window");
  TensorT<Real> out = TensorT<Real>::zeros({n, c, h / 2, w / 2});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.numel());
  kernels::maxpool2_forward(in.values.data(), n, c, h, w, out.values.data(),
                            argmax->data());
  Id y = push_value(std::move(out));
  nodes_.push_back(Node{{x},
                        y,
                        [=](TapeT& t) {
                          const auto& g = t.grads_[y];
                          auto& gx = t.grad_buf(x);
                          kernels::maxpool2_backward(argmax->data(), argmax->size(),
                                                     g.data(), gx.data());
                        }});
  return y;
}

template <typename Real>
auto TapeT<Real>::leaky_relu(Id x, Real slope) -> Id {
  const auto& in = val(x);
  TensorT<Real> out = in;
  for (Real& v : out.values) v = v > Real(0) ? v : slope * v;
  Id y = push_value(std::move(out));
  nodes_.push_back(Node{{x},
                        y,
                        [=](TapeT& t) {
                          const auto& g = t.grads_[y];
                          const auto& xin = t.val(x);
                          auto& gx = t.grad_buf(x);
                          // subgradient at exactly 0 is 1
                          for (std::size_t i = 0; i < g.size(); ++i)
                            gx[i] += xin.values[i] >= Real(0) ? g[i] : slope * g[i];
                        }});
  return y;
}

template <typename Real>
auto TapeT<Real>::fully_connected(Id x, Id weights, Id bias) -> Id {
  const auto& in = val(x);
  const auto& w = val(weights);
  const auto& b = val(bias);
  if (in.rank() != 2 || w.rank() != 2)
    throw DimensionError("fully_connected: expected [N,Din] x [Din,Dout]");
  if (in.dim(1) != w.dim(0))
    throw DimensionError("fully_connected: inner dims disagree: " + shape_str(in.shape) +
                         " x " + shape_str(w.shape));
  if (b.numel() != w.dim(1))
    throw DimensionError("fully_connected: bias length " + std::to_string(b.numel()) +
                         " != " + std::to_string(w.dim(1)));
  const std::size_t n = in.dim(0), din = in.dim(1), dout = w.dim(1);
  TensorT<Real> out = TensorT<Real>::zeros({n, dout});
  kernels::fc_forward(in.values.data(), n, din, w.values.data(), b.values.data(), dout,
                      out.values.data());
  Id y = push_value(std::move(out));
  nodes_.push_back(Node{{x, weights, bias},
                        y,
                        [=](TapeT& t) {
                          const auto& g = t.grads_[y];
                          const auto& xin = t.val(x);
                          const auto& wt = t.val(weights);
                          auto& gx = t.grad_buf(x);
                          auto& gw = t.grad_buf(weights);
                          auto& gb = t.grad_buf(bias);
                          kernels::fc_backward(xin.values.data(), n, din, wt.values.data(),
                                               dout, g.data(), gx.data(), gw.data(),
                                               gb.data());
                        }});
  return y;
}

template <typename Real>
auto TapeT<Real>::dropout(Id x, Real rate, bool training, RngStream& rng) -> Id {
  if (!(rate >= Real(0) && rate < Real(1)))
    throw ParameterError("dropout: rate must lie in [0,1), got " +
                         std::to_string(static_cast<double>(rate)));
  const auto& in = val(x);
  if (!training || rate == Real(0)) {
    TensorT<Real> out = in;
    Id y = push_value(std::move(out));
    nodes_.push_back(Node{{x},
                          y,
                          [=](TapeT& t) {
                            const auto& g = t.grads_[y];
                            auto& gx = t.grad_buf(x);
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          }});
    return y;
  }
  const Real scale = Real(1) / (Real(1) - rate);
  auto mask = std::make_shared<std::vector<Real>>(in.numel());
  TensorT<Real> out = in;
  for (std::size_t i = 0; i < in.numel(); ++i) {
    const Real m = rng.uniform() < static_cast<double>(rate) ? Real(0) : scale;
    (*mask)[i] = m;
    out.values[i] *= m;
  }
  Id y = push_value(std::move(out));
  nodes_.push_back(Node{{x},
                        y,
                        [=](TapeT& t) {
                          const auto& g = t.grads_[y];
                          auto& gx = t.grad_buf(x);
                          for (std::size_t i = 0; i < g.size(); ++i)
                            gx[i] += g[i] * (*mask)[i];
                        }});
  return y;
}

template <typename Real>
auto TapeT<Real>::flatten(Id x) -> Id {
  const auto& in = val(x);
  if (in.rank() < 2) throw DimensionError("flatten: rank must be >= 2");
  TensorT<Real> out({in.dim(0), in.numel() / in.dim(0)}, in.values);
  Id y = push_value(std::move(out));
  nodes_.push_back(Node{{x},
                        y,
                        [=](TapeT& t) {
                          const auto& g = t.grads_[y];
                          auto& gx = t.grad_buf(x);
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                        }});
  return y;
}

template <typename Real>
auto TapeT<Real>::add(Id a, Id b) -> Id {
  const auto& ta = val(a);
  const auto& tb = val(b);
  if (ta.shape != tb.shape)
    throw DimensionError("add: shape mismatch " + shape_str(ta.shape) + " vs " +
                         shape_str(tb.shape));
  TensorT<Real> out = ta;
  for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] += tb.values[i];
  Id y = push_value(std::move(out));
  nodes_.push_back(Node{{a, b},
                        y,
                        [=](TapeT& t) {
                          const auto& g = t.grads_[y];
                          auto& ga = t.grad_buf(a);
                          auto& gb = t.grad_buf(b);
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            ga[i] += g[i];
                            gb[i] += g[i];
                          }
                        }});
  return y;
}

template <typename Real>
auto TapeT<Real>::channel_mix(Id a, Id b, Id alpha) -> Id {
  const auto& ta = val(a);
  const auto& tb = val(b);
  const auto& al = val(alpha);
  if (ta.shape != tb.shape)
    throw DimensionError("channel_mix: shape mismatch " + shape_str(ta.shape) + " vs " +
                         shape_str(tb.shape));
  if (ta.rank() != 4 || al.numel() != ta.dim(1))
    throw DimensionError("channel_mix: alpha length must equal channel count");
  const std::size_t n = ta.dim(0), c = ta.dim(1), hw = ta.dim(2) * ta.dim(3);
  TensorT<Real> out = TensorT<Real>::zeros(ta.shape);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const Real av = al.values[ch];
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j)
        out.values[off + j] = av * ta.values[off + j] + (Real(1) - av) * tb.values[off + j];
    }
  Id y = push_value(std::move(out));
  nodes_.push_back(Node{{a, b, alpha},
                        y,
                        [=](TapeT& t) {
                          const auto& g = t.grads_[y];
                          const auto& va = t.val(a);
                          const auto& vb = t.val(b);
                          const auto& val_ = t.val(alpha);
                          auto& ga = t.grad_buf(a);
                          auto& gb = t.grad_buf(b);
                          auto& gal = t.grad_buf(alpha);
                          for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t ch = 0; ch < c; ++ch) {
                              const Real av = val_.values[ch];
                              const std::size_t off = (i * c + ch) * hw;
                              Real gacc{};
                              for (std::size_t j = 0; j < hw; ++j) {
                                const Real gv = g[off + j];
                                ga[off + j] += av * gv;
                                gb[off + j] += (Real(1) - av) * gv;
                                gacc += gv * (va.values[off + j] - vb.values[off + j]);
                              }
                              gal[ch] += gacc;
                            }
                        }});
  return y;
}

template <typename Real>
auto TapeT<Real>::softmax_cross_entropy(Id logits, std::vector<std::size_t> labels) -> Id {
  const auto& z = val(logits);
  if (z.rank() != 2) throw DimensionError("softmax_cross_entropy: logits must be [N,K]");
  const std::size_t n = z.dim(0), k = z.dim(1);
  if (labels.size() != n)
    throw DimensionError("softmax_cross_entropy: got " + std::to_string(labels.size()) +
                         " labels for batch " + std::to_string(n));
  for (std::size_t lbl : labels)
    if (lbl >= k)
      throw LabelError("softmax_cross_entropy: label " + std::to_string(lbl) +
                       " out of range [0," + std::to_string(k) + ")");
  auto probs = std::make_shared<std::vector<Real>>(n * k);
  Real loss{};
  for (std::size_t i = 0; i < n; ++i) {
    const Real* row = z.values.data() + i * k;
    Real m = row[0];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
    Real sum{};
    Real* prow = probs->data() + i * k;
    for (std::size_t j = 0; j < k; ++j) {
      prow[j] = std::exp(row[j] - m);
      sum += prow[j];
    }
    const Real inv = Real(1) / sum;
    for (std::size_t j = 0; j < k; ++j) prow[j] *= inv;
    loss += std::log(sum) - (row[labels[i]] - m);
  }
  loss /= static_cast<Real>(n);
  Id y = push_value(TensorT<Real>::scalar(loss));
  auto lbl = std::make_shared<std::vector<std::size_t>>(std::move(labels));
  nodes_.push_back(Node{{logits},
                        y,
                        [=](TapeT& t) {
                          const Real gy = t.grads_[y][0];
                          auto& gz = t.grad_buf(logits);
                          const Real scale = gy / static_cast<Real>(n);
                          for (std::size_t i = 0; i < n; ++i) {
                            const Real* prow = probs->data() + i * k;
                            Real* grow = gz.data() + i * k;
                            for (std::size_t j = 0; j < k; ++j) grow[j] += scale * prow[j];
                            grow[(*lbl)[i]] -= scale;
                          }
                        }});
  return y;
}

template <typename Real>
auto TapeT<Real>::sigmoid_binary_cross_entropy(Id logits, TensorT<Real> targets) -> Id {
  const auto& z = val(logits);
  if (z.shape != targets.shape)
    throw DimensionError("sigmoid_bce: target shape " + shape_str(targets.shape) +
                         " != logits " + shape_str(z.shape));
  for (Real t : targets.values)
    if (t != Real(0) && t != Real(1))
      throw LabelError("sigmoid_bce: targets must be binary");
  const std::size_t total = z.numel();
  Real loss{};
  for (std::size_t i = 0; i < total; ++i) {
    const Real zv = z.values[i];
    const Real tv = targets.values[i];
    loss += std::max(zv, Real(0)) - zv * tv + std::log1p(std::exp(-std::abs(zv)));
  }
  loss /= static_cast<Real>(total);
  Id y = push_value(TensorT<Real>::scalar(loss));
  auto tgt = std::make_shared<TensorT<Real>>(std::move(targets));
  nodes_.push_back(Node{{logits},
                        y,
                        [=](TapeT& t) {
                          const Real gy = t.grads_[y][0];
                          const auto& zt = t.val(logits);
                          auto& gz = t.grad_buf(logits);
                          const Real scale = gy / static_cast<Real>(total);
                          for (std::size_t i = 0; i < total; ++i) {
                            const Real s = Real(1) / (Real(1) + std::exp(-zt.values[i]));
                            gz[i] += scale * (s - tgt->values[i]);
                          }
                        }});
  return y;
}

template <typename Real>
auto TapeT<Real>::blend(Id a, Id b, Real wa, Real wb) -> Id {
  const auto& ta = val(a);
  const auto& tb = val(b);
  if (ta.numel() != 1 || tb.numel() != 1)
    throw DimensionError("blend: both operands must be scalars");
  Id y = push_value(TensorT<Real>::scalar(wa * ta.values[0] + wb * tb.values[0]));
  nodes_.push_back(Node{{a, b},
                        y,
                        [=](TapeT& t) {
                          const Real g = t.grads_[y][0];
                          t.grad_buf(a)[0] += wa * g;
                          t.grad_buf(b)[0] += wb * g;
                        }});
  return y;
}

template <typename Real>
auto TapeT<Real>::inner(Id x, std::vector<Real> coeffs) -> Id {
  const auto& in = val(x);
  if (coeffs.size() != in.numel())
    throw DimensionError("inner: coefficient length != value length");
  Real s{};
  for (std::size_t i = 0; i < coeffs.size(); ++i) s += coeffs[i] * in.values[i];
  Id y = push_value(TensorT<Real>::scalar(s));
  auto c = std::make_shared<std::vector<Real>>(std::move(coeffs));
  nodes_.push_back(Node{{x},
                        y,
                        [=](TapeT& t) {
                          const Real g = t.grads_[y][0];
                          auto& gx = t.grad_buf(x);
                          for (std::size_t i = 0; i < gx.size(); ++i)
                            gx[i] += g * (*c)[i];
                        }});
  return y;
}

template <typename Real>
void TapeT<Real>::run_backward(Id root, std::span<const std::size_t> order) {
  if (backward_done_) throw Error("tape: backward already ran; tapes are single-use");
  if (val(root).numel() != 1) throw ParameterError("backward: root must be a scalar");
  backward_done_ = true;
  grad_buf(root)[0] = Real(1);
  std::vector<bool> seen(nodes_.size(), false);
  for (std::size_t idx : order) {
    if (idx >= nodes_.size() || seen[idx])
      throw Error("backward: order is not a permutation of node indices");
    seen[idx] = true;
    Node& nd = nodes_[idx];
    if (grads_[nd.output].empty()) grad_buf(nd.output);  // unreached: zero grad
    nd.pull(*this);
  }
  for (auto& [id, param] : leaves_) {
    if (grads_[id].empty()) continue;
    param->ensure_grad();
    const auto& g = grads_[id];
    for (std::size_t i = 0; i < g.size(); ++i) param->grad[i] += g[i];
  }
}

template <typename Real>
std::size_t TapeT<Real>::backward(Id root) {
  std::vector<std::size_t> order(nodes_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = nodes_.size() - 1 - i;
  run_backward(root, order);
  return nodes_.size();
}

template <typename Real>
std::size_t TapeT<Real>::backward_with_order(Id root, std::span<const std::size_t> order) {
  if (order.size() != nodes_.size())
    throw Error("backward_with_order: order must cover every node exactly once");
  run_backward(root, order);
  return nodes_.size();
}

template <typename Real>
auto TapeT<Real>::node_metas() const -> std::vector<NodeMeta> {
  std::vector<NodeMeta> out;
  out.reserve(nodes_.size());
  for (const Node& n : nodes_) out.push_back(NodeMeta{n.inputs, n.output});
  return out;
}

template class TapeT<double>;
template class TapeT<float>;

}  // namespace adnet
