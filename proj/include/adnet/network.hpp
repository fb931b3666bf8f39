#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adnet/checkpoint.hpp"
#include "adnet/rng.hpp"
#include "adnet/tape.hpp"
#include "adnet/tensor.hpp"

namespace adnet {

// How auxiliary-pathway features enter the main pathway after a block.
enum class AdaptiveMode { kBaseline, kLinear, kDeep };

const char* to_string(AdaptiveMode mode);
AdaptiveMode adaptive_mode_from_string(const std::string& s);

// Auxiliary objective attached to the second pathway.
enum class AuxTaskKind { kWordRecognition, kWordLength, kCharAttributes, kCombined };

const char* to_string(AuxTaskKind kind);
AuxTaskKind aux_task_from_string(const std::string& s);

inline constexpr std::size_t kWordLengthClasses = 13;
inline constexpr std::size_t kCharBins = 26;

struct AuxHeadSpec {
  AuxTaskKind kind = AuxTaskKind::kWordRecognition;
  std::size_t vocab_size = 0;  // used by WordRecognition and Combined

  std::size_t width() const;
  // Multi-label heads train with sigmoid BCE; single-label with softmax CE.
  bool multi_label() const {
    return kind == AuxTaskKind::kCharAttributes || kind == AuxTaskKind::kCombined;
  }
};

struct NetworkConfig {
  std::size_t input_height = 40;
  std::size_t input_width = 120;
  std::array<std::size_t, 4> channels = {64, 128, 256, 512};
  std::array<std::size_t, 2> fc_widths = {1024, 1024};
  std::size_t writer_classes = 0;
  AuxHeadSpec aux;
  AdaptiveMode mode = AdaptiveMode::kBaseline;
  std::vector<int> adaptive_blocks = {2, 3, 4};  // subset of {2,3,4}; ignored by Baseline
  double leaky_slope = 0.1;
  double dropout_rate = 0.5;

  // Spatial size of one feature map after the four pooling stages.
  std::size_t final_height() const { return input_height / 16; }
  std::size_t final_width() const { return input_width / 16; }
  std::size_t flat_features() const { return channels[3] * final_height() * final_width(); }

  bool block_is_adaptive(int i) const;

  // Throws ConfigError when a structural constraint is violated.
  void validate() const;

  std::map<std::string, std::string> to_header() const;
  static NetworkConfig from_header(const std::map<std::string, std::string>& kv);
};

// Closed-form trainable parameter count for a configuration.
//
//   conv(ci,co)        = 9*ci*co + co
//   shared             = conv(1,c1) + conv(c1,c1)
//   pathway convs      = sum_{i=2..4} conv(c_{i-1},c_i) + conv(c_i,c_i)
//   fc stack(K)        = D*f1 + f1 + f1*f2 + f2 + f2*K + K,   D = c4*(H/16)*(W/16)
//   linear adapters    = sum_{i in blocks} c_i
//   deep adapters      = sum_{i in blocks} 2*conv(c_i,c_i)
//   total = shared + 2*pathway convs + fc(writers) + fc(aux width) + adapters
std::size_t parameter_count(const NetworkConfig& config);

// Two-pathway convolutional network: a shared first block, per-task blocks
// 2..4, and per-task fully-connected stacks. At each configured block
// boundary the main pathway input is adapted with auxiliary features; the
// auxiliary pathway always continues from its own unmodified activations.
template <typename Real>
class Network {
 public:
  explicit Network(NetworkConfig config);

  // Xavier-initializes weights and zeroes biases; linear-adapter mixing
  // coefficients start at 0.5. Each parameter draws from a substream keyed
  // by its name, so shared parameters match across modes for equal seeds.
  void init_params(const RngStream& base);

  struct Output {
    typename TapeT<Real>::Id writer_logits;
    typename TapeT<Real>::Id aux_logits;
  };

  // batch: [N,1,H,W] with pixel values in [0,1]. dropout_rng must be
  // non-null when training with a nonzero dropout rate.
  Output forward(TapeT<Real>& tape, TensorT<Real> batch, bool training,
                 RngStream* dropout_rng);

  const NetworkConfig& config() const { return config_; }

  // Stable parameter order; names are unique.
  std::vector<std::pair<std::string, TensorT<Real>*>> named_parameters();
  std::vector<TensorT<Real>*> parameters();
  TensorT<Real>* param(const std::string& name);

  void zero_grads();

 private:
  struct ParamDef {
    std::string name;
    TensorT<Real> tensor;
  };

  std::size_t add_param(const std::string& name, std::vector<std::size_t> shape);
  TensorT<Real>& p(std::size_t idx) { return params_[idx].tensor; }

  using Id = typename TapeT<Real>::Id;
  Id fc_stack(TapeT<Real>& tape, Id x, const std::array<std::size_t, 6>& idx,
              bool training, RngStream* rng);

  NetworkConfig config_;
  std::vector<ParamDef> params_;
  std::map<std::string, std::size_t> index_;

  // parameter indices, resolved once at construction
  std::array<std::size_t, 4> shared_;                         // c1.w c1.b c2.w c2.b
  std::array<std::array<std::size_t, 4>, 3> main_blocks_;     // blocks 2..4
  std::array<std::array<std::size_t, 4>, 3> aux_blocks_;
  std::array<std::size_t, 6> main_fc_;                        // fc1.w/b fc2.w/b head.w/b
  std::array<std::size_t, 6> aux_fc_;
  std::map<int, std::size_t> linear_alpha_;                   // block -> alpha idx
  std::map<int, std::array<std::size_t, 4>> deep_adapters_;   // block -> c1.w/b c2.w/b
};

// --- network checkpoints -------------------------------------------------
// Layout: a text header (config plus caller-supplied key=value entries),
// a %TENSORS marker line, then the binary tensor blob. Network parameters
// are stored under their parameter names; extra tensors (optimizer state)
// keep whatever names the caller gives them.
void save_network(const std::string& path, Network<double>& net,
                  const std::map<std::string, std::string>& extra_header = {},
                  const NamedTensors& extra_tensors = {});

struct LoadedNetwork {
  NetworkConfig config;
  std::map<std::string, std::string> header;  // non-config entries
  NamedTensors tensors;                       // everything in the blob
};

// Parses and validates the file; returns raw parts.
LoadedNetwork read_network_file(const std::string& path);

// Instantiates the network and installs parameter tensors, checking shapes.
Network<double> build_network_from(const LoadedNetwork& loaded);

}  // namespace adnet
