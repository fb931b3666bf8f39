#include "adnet/network.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "adnet/errors.hpp"
#include "adnet/init.hpp"

namespace adnet {

const char* to_string(AdaptiveMode mode) {
  switch (mode) {
    case AdaptiveMode::kBaseline: return "baseline";
    case AdaptiveMode::kLinear: return "linear";
    case AdaptiveMode::kDeep: return "deep";
  }
  return "?";
}

AdaptiveMode adaptive_mode_from_string(const std::string& s) {
  if (s == "baseline") return AdaptiveMode::kBaseline;
  if (s == "linear") return AdaptiveMode::kLinear;
  if (s == "deep") return AdaptiveMode::kDeep;
  throw ParameterError("unknown adaptive mode: '" + s + "' (expected baseline|linear|deep)");
}

const char* to_string(AuxTaskKind kind) {
  switch (kind) {
    case AuxTaskKind::kWordRecognition: return "word";
    case AuxTaskKind::kWordLength: return "length";
    case AuxTaskKind::kCharAttributes: return "chars";
    case AuxTaskKind::kCombined: return "combined";
  }
  return "?";
}

AuxTaskKind aux_task_from_string(const std::string& s) {
  if (s == "word") return AuxTaskKind::kWordRecognition;
  if (s == "length") return AuxTaskKind::kWordLength;
  if (s == "chars") return AuxTaskKind::kCharAttributes;
  if (s == "combined") return AuxTaskKind::kCombined;
  throw ParameterError("unknown aux task: '" + s + "' (expected word|length|chars|combined)");
}

std::size_t AuxHeadSpec::width() const {
  switch (kind) {
    case AuxTaskKind::kWordRecognition: return vocab_size;
    case AuxTaskKind::kWordLength: return kWordLengthClasses;
    case AuxTaskKind::kCharAttributes: return kCharBins;
    case AuxTaskKind::kCombined: return kCharBins + kWordLengthClasses + vocab_size;
  }
  return 0;
}

bool NetworkConfig::block_is_adaptive(int i) const {
  if (mode == AdaptiveMode::kBaseline) return false;
  return std::find(adaptive_blocks.begin(), adaptive_blocks.end(), i) !=
         adaptive_blocks.end();
}

void NetworkConfig::validate() const {
  for (std::size_t c : channels)
    if (c == 0) throw ConfigError("channels must be positive");
  for (std::size_t f : fc_widths)
    if (f == 0) throw ConfigError("fc widths must be positive");
  if (writer_classes == 0) throw ConfigError("writer_classes must be positive");
  if (aux.width() == 0)
    throw ConfigError("aux head has zero width (missing vocab size?)");
  if (final_height() < 2 || final_width() < 2)
    throw ConfigError("input " + std::to_string(input_height) + "x" +
                      std::to_string(input_width) +
                      " leaves the last feature map at " +
                      std::to_string(final_height()) + "x" + std::to_string(final_width()) +
                      " after four pools; both sides must stay >= 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("dropout_rate must lie in [0,1)");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0))
    throw ConfigError("leaky_slope must lie in [0,1)");
  for (std::size_t i = 0; i < adaptive_blocks.size(); ++i) {
    int b = adaptive_blocks[i];
    if (b < 2 || b > 4) throw ConfigError("adaptive blocks must be within {2,3,4}");
    if (i > 0 && adaptive_blocks[i - 1] >= b)
      throw ConfigError("adaptive blocks must be strictly increasing");
  }
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename It>
std::string join_csv(It begin, It end) {
  std::string s;
  for (It it = begin; it != end; ++it) {
    if (!s.empty()) s += ',';
    s += std::to_string(*it);
  }
  return s;
}

std::vector<std::uint64_t> parse_csv_u64(const std::string& s) {
  std::vector<std::uint64_t> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  return out;
}

const std::string& header_at(const std::map<std::string, std::string>& kv,
                             const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw CheckpointError("checkpoint header missing key: " + key);
  return it->second;
}

}  // namespace

std::map<std::string, std::string> NetworkConfig::to_header() const {
  std::map<std::string, std::string> kv;
  kv["input_height"] = std::to_string(input_height);
  kv["input_width"] = std::to_string(input_width);
  kv["channels"] = join_csv(channels.begin(), channels.end());
  kv["fc_widths"] = join_csv(fc_widths.begin(), fc_widths.end());
  kv["writer_classes"] = std::to_string(writer_classes);
  kv["aux_task"] = to_string(aux.kind);
  kv["vocab_size"] = std::to_string(aux.vocab_size);
  kv["adaptive_mode"] = to_string(mode);
  kv["adaptive_blocks"] = join_csv(adaptive_blocks.begin(), adaptive_blocks.end());
  kv["leaky_slope"] = fmt_double(leaky_slope);
  kv["dropout_rate"] = fmt_double(dropout_rate);
  return kv;
}

NetworkConfig NetworkConfig::from_header(const std::map<std::string, std::string>& kv) {
  NetworkConfig c;
  c.input_height = std::stoull(header_at(kv, "input_height"));
  c.input_width = std::stoull(header_at(kv, "input_width"));
  auto ch = parse_csv_u64(header_at(kv, "channels"));
  auto fw = parse_csv_u64(header_at(kv, "fc_widths"));
  if (ch.size() != 4 || fw.size() != 2)
    throw CheckpointError("checkpoint header: malformed channels/fc_widths");
  for (int i = 0; i < 4; ++i) c.channels[i] = ch[i];
  for (int i = 0; i < 2; ++i) c.fc_widths[i] = fw[i];
  c.writer_classes = std::stoull(header_at(kv, "writer_classes"));
  c.aux.kind = aux_task_from_string(header_at(kv, "aux_task"));
  c.aux.vocab_size = std::stoull(header_at(kv, "vocab_size"));
  c.mode = adaptive_mode_from_string(header_at(kv, "adaptive_mode"));
  c.adaptive_blocks.clear();
  for (auto b : parse_csv_u64(header_at(kv, "adaptive_blocks")))
    c.adaptive_blocks.push_back(static_cast<int>(b));
  c.leaky_slope = std::stod(header_at(kv, "leaky_slope"));
  c.dropout_rate = std::stod(header_at(kv, "dropout_rate"));
  return c;
}

std::size_t parameter_count(const NetworkConfig& c) {
  auto conv = [](std::size_t ci, std::size_t co) { return 9 * ci * co + co; };
  auto fc = [](std::size_t a, std::size_t b) { return a * b + b; };
  const auto& ch = c.channels;
  std::size_t shared = conv(1, ch[0]) + conv(ch[0], ch[0]);
  std::size_t pathway = 0;
  for (int i = 1; i < 4; ++i) pathway += conv(ch[i - 1], ch[i]) + conv(ch[i], ch[i]);
  const std::size_t d = c.flat_features();
  auto stack = [&](std::size_t k) {
    return fc(d, c.fc_widths[0]) + fc(c.fc_widths[0], c.fc_widths[1]) +
           fc(c.fc_widths[1], k);
  };
  std::size_t adapters = 0;
  if (c.mode == AdaptiveMode::kLinear)
    for (int b : c.adaptive_blocks) adapters += ch[b - 1];
  if (c.mode == AdaptiveMode::kDeep)
    for (int b : c.adaptive_blocks) adapters += 2 * conv(ch[b - 1], ch[b - 1]);
  return shared + 2 * pathway + stack(c.writer_classes) + stack(c.aux.width()) + adapters;
}

template <typename Real>
std::size_t Network<Real>::add_param(const std::string& name,
                                     std::vector<std::size_t> shape) {
  params_.push_back(ParamDef{name, TensorT<Real>::zeros(std::move(shape))});
  index_[name] = params_.size() - 1;
  return params_.size() - 1;
}

template <typename Real>
Network<Real>::Network(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& ch = config_.channels;

  auto conv_pair = [&](const std::string& prefix, std::size_t ci, std::size_t co) {
    std::array<std::size_t, 2> idx{};
    idx[0] = add_param(prefix + ".w", {co, ci, 3, 3});
    idx[1] = add_param(prefix + ".b", {co});
    return idx;
  };
  auto block_params = [&](const std::string& prefix, std::size_t ci, std::size_t co) {
    std::array<std::size_t, 4> idx{};
    auto a = conv_pair(prefix + ".c1", ci, co);
    auto b = conv_pair(prefix + ".c2", co, co);
    idx = {a[0], a[1], b[0], b[1]};
    return idx;
  };

  {
    auto a = conv_pair("shared.c1", 1, ch[0]);
    auto b = conv_pair("shared.c2", ch[0], ch[0]);
    shared_ = {a[0], a[1], b[0], b[1]};
  }
  for (int i = 2; i <= 4; ++i)
    main_blocks_[i - 2] = block_params("main.b" + std::to_string(i), ch[i - 2], ch[i - 1]);
  for (int i = 2; i <= 4; ++i)
    aux_blocks_[i - 2] = block_params("aux.b" + std::to_string(i), ch[i - 2], ch[i - 1]);

  auto stack_params = [&](const std::string& prefix, std::size_t head) {
    std::array<std::size_t, 6> idx{};
    const std::size_t d = config_.flat_features();
    idx[0] = add_param(prefix + ".fc1.w", {d, config_.fc_widths[0]});
    idx[1] = add_param(prefix + ".fc1.b", {config_.fc_widths[0]});
    idx[2] = add_param(prefix + ".fc2.w", {config_.fc_widths[0], config_.fc_widths[1]});
    idx[3] = add_param(prefix + ".fc2.b", {config_.fc_widths[1]});
    idx[4] = add_param(prefix + ".head.w", {config_.fc_widths[1], head});
    idx[5] = add_param(prefix + ".head.b", {head});
    return idx;
  };
  main_fc_ = stack_params("main", config_.writer_classes);
  aux_fc_ = stack_params("aux", config_.aux.width());

  if (config_.mode == AdaptiveMode::kLinear) {
    for (int b : config_.adaptive_blocks)
      linear_alpha_[b] = add_param("adapt.b" + std::to_string(b) + ".alpha", {ch[b - 1]});
  } else if (config_.mode == AdaptiveMode::kDeep) {
    for (int b : config_.adaptive_blocks) {
      const std::string prefix = "adapt.b" + std::to_string(b);
      auto c1 = conv_pair(prefix + ".c1", ch[b - 1], ch[b - 1]);
      auto c2 = conv_pair(prefix + ".c2", ch[b - 1], ch[b - 1]);
      deep_adapters_[b] = {c1[0], c1[1], c2[0], c2[1]};
    }
  }
}

template <typename Real>
void Network<Real>::init_params(const RngStream& base) {
  const RngStream init_base = base.split("init");
  for (auto& def : params_) {
    const bool is_weight = def.name.size() > 2 && def.name.ends_with(".w");
    const bool is_alpha = def.name.ends_with(".alpha");
    if (is_alpha) {
      std::fill(def.tensor.values.begin(), def.tensor.values.end(), Real(0.5));
    } else if (is_weight) {
      RngStream s = init_base.split(def.name);
      auto [fin, fout] = xavier_fans(def.tensor.shape);
      xavier_fill(def.tensor, fin, fout, s);
    } else {
      std::fill(def.tensor.values.begin(), def.tensor.values.end(), Real(0));
    }
  }
}

template <typename Real>
auto Network<Real>::fc_stack(TapeT<Real>& tape, Id x, const std::array<std::size_t, 6>& idx,
                             bool training, RngStream* rng) -> Id {
  const Real slope = static_cast<Real>(config_.leaky_slope);
  const Real rate = static_cast<Real>(config_.dropout_rate);
  auto drop = [&](Id v) -> Id {
    if (!training || rate == Real(0)) return tape.dropout(v, rate, false, *rng);
    return tape.dropout(v, rate, true, *rng);
  };
  Id h = tape.fully_connected(x, tape.leaf(&p(idx[0])), tape.leaf(&p(idx[1])));
  h = tape.leaky_relu(h, slope);
  h = drop(h);
  h = tape.fully_connected(h, tape.leaf(&p(idx[2])), tape.leaf(&p(idx[3])));
  h = tape.leaky_relu(h, slope);
  h = drop(h);
  return tape.fully_connected(h, tape.leaf(&p(idx[4])), tape.leaf(&p(idx[5])));
}

template <typename Real>
auto Network<Real>::forward(TapeT<Real>& tape, TensorT<Real> batch, bool training,
                            RngStream* dropout_rng) -> Output {
  if (batch.rank() != 4 || batch.dim(1) != 1 || batch.dim(2) != config_.input_height ||
      batch.dim(3) != config_.input_width)
    throw DimensionError("forward: expected [N,1," + std::to_string(config_.input_height) +
                         "," + std::to_string(config_.input_width) + "], got " +
                         shape_str(batch.shape));
  static RngStream null_rng(0);
  RngStream* rng = dropout_rng;
  if (!rng) {
    if (training && config_.dropout_rate > 0.0)
      throw ParameterError("forward: training with dropout requires an rng stream");
    rng = &null_rng;
  }
  const Real slope = static_cast<Real>(config_.leaky_slope);

  auto run_block = [&](Id x, const std::array<std::size_t, 4>& idx) -> Id {
    Id h = tape.conv2d(x, tape.leaf(&p(idx[0])), tape.leaf(&p(idx[1])));
    h = tape.leaky_relu(h, slope);
    h = tape.conv2d(h, tape.leaf(&p(idx[2])), tape.leaf(&p(idx[3])));
    h = tape.leaky_relu(h, slope);
    return tape.maxpool2(h);
  };

  Id x = tape.input(std::move(batch));
  Id r1 = run_block(x, shared_);

  Id main_in = r1;
  Id aux_in = r1;
  for (int block = 2; block <= 4; ++block) {
    Id m = run_block(main_in, main_blocks_[block - 2]);
    Id a = run_block(aux_in, aux_blocks_[block - 2]);
    Id m_next = m;
    if (config_.block_is_adaptive(block)) {
      if (config_.mode == AdaptiveMode::kLinear) {
        m_next = tape.channel_mix(m, a, tape.leaf(&p(linear_alpha_.at(block))));
      } else {
        const auto& idx = deep_adapters_.at(block);
        Id c = tape.conv2d(a, tape.leaf(&p(idx[0])), tape.leaf(&p(idx[1])));
        c = tape.leaky_relu(c, slope);
        c = tape.conv2d(c, tape.leaf(&p(idx[2])), tape.leaf(&p(idx[3])));
        m_next = tape.add(m, c);
      }
    }
    main_in = m_next;
    aux_in = a;
  }

  Output out{};
  out.writer_logits = fc_stack(tape, tape.flatten(main_in), main_fc_, training, rng);
  out.aux_logits = fc_stack(tape, tape.flatten(aux_in), aux_fc_, training, rng);
  return out;
}

template <typename Real>
std::vector<std::pair<std::string, TensorT<Real>*>> Network<Real>::named_parameters() {
  std::vector<std::pair<std::string, TensorT<Real>*>> out;
  out.reserve(params_.size());
  for (auto& def : params_) out.emplace_back(def.name, &def.tensor);
  return out;
}

template <typename Real>
std::vector<TensorT<Real>*> Network<Real>::parameters() {
  std::vector<TensorT<Real>*> out;
  out.reserve(params_.size());
  for (auto& def : params_) out.push_back(&def.tensor);
  return out;
}

template <typename Real>
TensorT<Real>* Network<Real>::param(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second].tensor;
}

template <typename Real>
void Network<Real>::zero_grads() {
  for (auto& def : params_) def.tensor.zero_grad();
}

template class Network<double>;
template class Network<float>;

// --- checkpoint files ------------------------------------------------------

namespace {
constexpr const char* kNetMagicLine = "ADNETNET v1";
constexpr const char* kTensorMarker = "%TENSORS";

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "input_height", "input_width",  "channels",        "fc_widths",
      "writer_classes", "aux_task",   "vocab_size",      "adaptive_mode",
      "adaptive_blocks", "leaky_slope", "dropout_rate"};
  return keys;
}
}  // namespace

void save_network(const std::string& path, Network<double>& net,
                  const std::map<std::string, std::string>& extra_header,
                  const NamedTensors& extra_tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StorageError("cannot open checkpoint for write: " + path);
  os << kNetMagicLine << '\n';
  auto kv = net.config().to_header();
  for (const auto& key : config_keys()) os << key << '=' << kv.at(key) << '\n';
  for (const auto& [k, v] : extra_header) {
    if (kv.count(k)) throw CheckpointError("extra header key collides with config: " + k);
    os << k << '=' << v << '\n';
  }
  os << kTensorMarker << '\n';
  NamedTensors tensors;
  for (auto& [name, t] : net.named_parameters()) tensors.emplace_back(name, *t);
  for (const auto& [name, t] : extra_tensors) tensors.emplace_back(name, t);
  write_tensor_blob(os, tensors);
  if (!os) throw StorageError("checkpoint write failed: " + path);
}

LoadedNetwork read_network_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StorageError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(is, line) || line != kNetMagicLine)
    throw CheckpointError("not a network checkpoint: " + path);
  std::map<std::string, std::string> kv;
  bool saw_marker = false;
  while (std::getline(is, line)) {
    if (line == kTensorMarker) {
      saw_marker = true;
      break;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CheckpointError("malformed checkpoint header line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!saw_marker) throw CheckpointError("checkpoint missing tensor section: " + path);

  LoadedNetwork out;
  out.config = NetworkConfig::from_header(kv);
  for (const auto& key : config_keys()) kv.erase(key);
  out.header = std::move(kv);
  out.tensors = read_tensor_blob(is);
  return out;
}

Network<double> build_network_from(const LoadedNetwork& loaded) {
  try {
    loaded.config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
  }
  Network<double> net(loaded.config);
  for (auto& [name, t] : net.named_parameters()) {
    const Tensor* stored = find_tensor(loaded.tensors, name);
    if (!stored) throw CheckpointError("checkpoint missing parameter: " + name);
    if (stored->shape != t->shape)
      throw CheckpointError("checkpoint parameter " + name + " has shape " +
                            shape_str(stored->shape) + ", expected " + shape_str(t->shape));
    t->values = stored->values;
  }
  return net;
}

}  // namespace adnet
