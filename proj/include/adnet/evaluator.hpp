#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adnet/dataset.hpp"
#include "adnet/network.hpp"

namespace adnet {

struct EvalRequest {
  std::size_t batch_size = 64;
  std::vector<std::size_t> fuse_n = {1, 2, 3, 4, 5};
  std::size_t repetitions = 20;
  std::uint64_t seed = 7;
  // Average raw logits instead of softmax outputs when fusing.
  bool fuse_pre_softmax = false;
};

// Raw per-sample network outputs on a test set.
struct EvalOutputs {
  std::vector<std::vector<double>> writer_logits;
  std::vector<std::vector<double>> writer_probs;  // softmax of the above
  std::vector<std::vector<double>> aux_logits;
};

EvalOutputs run_inference(Network<double>& net, const LoadedDataset& data,
                          std::size_t batch_size);

// Fraction of rows whose label ranks among the k best scores; ties are
// resolved toward the lower class index. k must lie in [1, K].
double topk_accuracy(const std::vector<std::vector<double>>& scores,
                     const std::vector<std::size_t>& labels, std::size_t k);

// Argmax (ties to the lower index) of the elementwise mean of the given
// score vectors.
std::size_t fuse_predict(const std::vector<const std::vector<double>*>& outputs);

struct LengthBucket {
  std::size_t count = 0;
  double top1 = 0.0;
  bool low_support = false;  // fewer than 20 samples
};

struct CharBucket {
  std::size_t count = 0;
  double top1 = 0.0;
};

struct MetricsReport {
  double writer_top1 = 0.0;
  double writer_top5 = 0.0;
  std::string aux_task;
  // "top1"/"top5" for single-label tasks, "bit_accuracy"/"exact_match" for
  // multi-label ones.
  std::map<std::string, double> aux_metrics;
  std::map<std::size_t, LengthBucket> per_length;  // key: word length 1..13
  std::map<char, CharBucket> per_char;             // key: letter present in the word
  std::map<std::size_t, double> fusion_curve;      // key: N
};

// Runs every evaluation: top-k, N-word fusion, per-length and per-character
// breakdowns. Never mutates the network.
MetricsReport evaluate(Network<double>& net, const LoadedDataset& test,
                       const EvalRequest& request);

// Writes metrics.csv, fusion.csv, by_length.csv, by_char.csv into dir.
void write_metrics_csvs(const std::string& dir, const MetricsReport& report);

}  // namespace adnet
